#pragma once

#include <string>
#include <string_view>

#include "viap/network.hpp"

namespace viap {

/// Model file layout, all integers little-endian:
///
///   "VIAPNET1"
///   repeated until end of file:
///     u32 name length, name bytes, u32 rank, rank x u64 extents, f64 payload
///
/// The first record is "arch" holding {H, W, C, K}; the six weight tensors
/// follow in ModelParams::kFieldNames order.
inline constexpr std::string_view kModelMagic = "VIAPNET1";

std::string encode_params(const ModelParams& params);
ModelParams decode_params(std::string_view bytes);

void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace viap
