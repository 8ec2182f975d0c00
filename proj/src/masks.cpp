#include "masks.hpp"

#include <cstdlib>

namespace dsan {

Tensor build_directional(std::size_t n, Direction direction) {
  if (n == 0) {
    throw Error(ErrorKind::kLogic, "build_directional: n must be at least 1");
  }
  Tensor mask = Tensor::constant(n, n, kMaskValue);
  for (std::size_t i = 0; i < n; ++i) {
    if (direction == Direction::kForward) {
      for (std::size_t j = 0; j < i; ++j) mask.set(i, j, 0.0);
    } else {
      for (std::size_t j = i + 1; j < n; ++j) mask.set(i, j, 0.0);
    }
  }
  return mask;
}

Tensor build_distance(std::size_t n) {
  if (n == 0) {
    throw Error(ErrorKind::kLogic, "build_distance: n must be at least 1");
  }
  Tensor mask = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      mask.set(i, j, -std::fabs(static_cast<double>(i) - static_cast<double>(j)));
    }
  }
  return mask;
}

MaskSet build_mask_set(std::size_t n) {
  return MaskSet{
      .forward_mask = build_directional(n, Direction::kForward),
      .backward_mask = build_directional(n, Direction::kBackward),
      .distance = build_distance(n),
      .length = n,
  };
}

Tensor combine(const MaskSet& set, Direction direction, double alpha,
               std::span<const std::uint8_t> pad_mask) {
  std::size_t n = set.length;
  if (pad_mask.size() != n) {
    throw Error(ErrorKind::kLogic,
                "combine: pad mask length " + std::to_string(pad_mask.size()) +
                    " does not match mask length " + std::to_string(n));
  }
  const Tensor& directional =
      direction == Direction::kForward ? set.forward_mask : set.backward_mask;
  Tensor combined = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dir = directional.at(i, j);
      if (dir <= kMaskThreshold || pad_mask[j] == 0) {
        combined.set(i, j, kMaskValue);
      } else {
        combined.set(i, j, dir + alpha * set.distance.at(i, j));
      }
    }
  }
  return combined;
}

const MaskSet& MaskCache::get(std::size_t n) {
  {
    std::shared_lock lock(mutex_);
    auto it = sets_.find(n);
    if (it != sets_.end()) return *it->second;
  }
  std::unique_lock lock(mutex_);
  auto& slot = sets_[n];
  if (slot == nullptr) slot = std::make_unique<MaskSet>(build_mask_set(n));
  return *slot;
}

}  // namespace dsan
