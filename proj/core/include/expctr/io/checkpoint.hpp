#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "expctr/numerics/tensor.hpp"

namespace expctr::io {

/// One named tensor inside a checkpoint file.
struct NamedBlock {
  std::string name;
  numerics::Tensor tensor;
};

// File layout (little-endian):
//   "EXPCTRv1" | u64 block count | per block:
//   u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 values[]
void write_blocks(const std::filesystem::path& path, std::span<const NamedBlock> blocks);
std::vector<NamedBlock> read_blocks(const std::filesystem::path& path);

std::vector<NamedBlock> to_blocks(const numerics::ParameterRefs& params, const std::string& prefix = "");

/// Copies values for each parameter from the block named prefix+name.
/// Throws ValidationError on a missing block or a shape mismatch.
void load_blocks(std::span<const NamedBlock> blocks, const numerics::ParameterRefs& params,
                 const std::string& prefix = "");

const NamedBlock& find_block(std::span<const NamedBlock> blocks, const std::string& name);

}  // namespace expctr::io
