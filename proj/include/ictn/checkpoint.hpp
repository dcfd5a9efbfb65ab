#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "ictn/tensor.hpp"

namespace ictn {

// Checkpoint layout: magic "ICTN", version byte 1, then per parameter
// (ordered by name): u32 LE name length, UTF-8 name, u8 rank, rank x u32 LE
// extents, f64 LE values in row-major order.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<Parameter>& params);

std::vector<std::pair<std::string, Tensor>> load_checkpoint(
    const std::filesystem::path& path);

// Copies checkpoint values into the given parameters; the name sets and
// shapes must match exactly.
void restore_parameters(std::vector<Parameter>& params,
                        const std::filesystem::path& path);

}  // namespace ictn
