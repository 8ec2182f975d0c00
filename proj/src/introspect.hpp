#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nli.hpp"

namespace dsan {

inline std::size_t direction_index(Direction d) {
  return d == Direction::kForward ? 0 : 1;
}
inline const char* direction_name(Direction d) {
  return d == Direction::kForward ? "forward" : "backward";
}

/// Everything the case study measures on one sentence: attention weights per
/// head and head-averaged, gate means, FFN deactivation and output maxima,
/// pooling attention means, and max-pool selection percentages.
struct CaseStudyReport {
  std::vector<std::string> tokens;
  std::array<std::vector<Tensor>, 2> attn_per_head;  // [direction][head] n x n
  std::array<Tensor, 2> attn_avg;                    // [direction] n x n
  std::array<std::vector<double>, 2> gate_avg;       // mean gate per token
  std::array<std::vector<double>, 2> ffn_deact_ratio;
  std::array<std::vector<double>, 2> ffn_out_max;
  std::vector<double> multidim_avg_weight;
  std::vector<double> maxpool_ratio;  // percentages, sum to 100
};

/// One evaluation-mode forward pass with instrumentation taps. When
/// alpha_override is set the distance-mask weight from the checkpoint is
/// replaced for this capture only (alpha 0 reproduces the no-distance-mask
/// ablation on identical weights).
CaseStudyReport capture(const std::string& sentence, const NliModel& model,
                        std::optional<double> alpha_override = std::nullopt);

enum ExportFormat : int {
  kExportCsv = 1,
  kExportSvg = 2,
};

/// Writes one file per artifact under out_dir/{forward,backward,pooling}/.
/// CSV headers carry the tokens (RFC 4180 quoting); SVG heatmaps label both
/// axes with tokens and normalize the color scale to [0, max] per matrix.
void export_report(const CaseStudyReport& report, const std::string& out_dir,
                   int formats);

}  // namespace dsan
