#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "plab/model.hpp"

namespace plab {

// Checkpoint file layout:
//   line 1:            "plab-checkpoint v1"
//   key = value lines: model config
//   "tensors = N"
//   "end-header"
//   raw payload:       N tensors as little-endian 32-bit floats, row-major,
//                      in the for_each_tensor declaration order.
void save_checkpoint(const std::filesystem::path& path, const Parameters<float>& params);
Parameters<float> load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the serialized bytes; recorded in run manifests.
uint64_t checkpoint_hash(const Parameters<float>& params);

std::string describe_checkpoint(const Parameters<float>& params);

} // namespace plab
