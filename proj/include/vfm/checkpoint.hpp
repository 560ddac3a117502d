#pragma once

#include "vfm/datamodel.hpp"
#include "vfm/network.hpp"
#include "vfm/textio.hpp"

#include <string>

namespace vfm {

/// Binary layout, all integers and reals little-endian:
///   "VFMCKPT\0"  u32 version
///   u32 n, n bytes   model config as key=value text
///   u8 fitted, f64 std_floor, then (f64 mean, f64 std) for 20 design, 8 ops, 5 target features
///   u32 n, n bytes   metadata as key=value text
///   u32 count, then per entry: u32 name_len, name, u32 rows, u32 cols, rows*cols f64 in row-major order
struct Checkpoint {
    Model model;
    NormStats stats;
    KeyValueMap metadata;
};

std::string serialize_checkpoint(Model& model, const NormStats& stats, const KeyValueMap& metadata);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, Model& model, const NormStats& stats, const KeyValueMap& metadata);
Checkpoint load_checkpoint(const std::string& path);

} // namespace vfm
