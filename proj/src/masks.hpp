#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>

#include "tensor.hpp"

namespace dsan {

enum class Direction { kForward, kBackward };

/// The per-length constant masks added to attention logits. The forward mask
/// admits only strictly earlier positions, the backward mask only strictly
/// later ones; the diagonal is always masked so a token never attends to
/// itself. The distance mask entry (i, j) is -|i - j|.
struct MaskSet {
  Tensor forward_mask;   // n x n, 0 where j < i, kMaskValue elsewhere
  Tensor backward_mask;  // n x n, 0 where j > i, kMaskValue elsewhere
  Tensor distance;       // n x n, -|i - j|
  std::size_t length = 0;
};

Tensor build_directional(std::size_t n, Direction direction);
Tensor build_distance(std::size_t n);
MaskSet build_mask_set(std::size_t n);

/// directional + alpha * distance, saturated at the sentinel: any entry whose
/// directional component is masked, and any column whose pad flag is false,
/// is exactly kMaskValue so padding stays bit-invisible downstream.
Tensor combine(const MaskSet& set, Direction direction, double alpha,
               std::span<const std::uint8_t> pad_mask);

/// Masks are rebuilt only once per distinct padded length. Safe for
/// concurrent readers.
class MaskCache {
 public:
  const MaskSet& get(std::size_t n);

 private:
  std::shared_mutex mutex_;
  std::map<std::size_t, std::unique_ptr<MaskSet>> sets_;
};

}  // namespace dsan
