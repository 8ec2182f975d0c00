#pragma once

#include <string>

#include "nli.hpp"

namespace dsan {

/// Versioned little-endian binary container. Layout:
///   magic "DSANCKP1", u32 version,
///   model config (dims, heads, alpha, dropout, norm placement),
///   vocabulary (token list, ids are list positions),
///   frozen embedding matrix (vocab x d_e),
///   named parameters: canonical name, rows, cols, row-major f64 payload.
/// Canonical names follow enc.{fw,bw}.{mha,gate,ffn}.*, enc.pool.*, clf.*;
/// the full manifest is listed in the README.
void save_checkpoint(const NliModel& model, const std::string& path);

NliModel load_checkpoint(const std::string& path);

}  // namespace dsan
