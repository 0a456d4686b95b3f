#pragma once

#include <filesystem>
#include <iosfwd>

#include "mctsnet/nn/param_store.hpp"

namespace mctsnet::nn {

// Binary layout (all integers u64 little-endian, floats f64 little-endian):
//   "MCTSNET1"
//   repeated, lexicographic by name: name_len, name bytes, rank, dims..., values...
// The store's step counter travels as the pseudo-entry "meta.step" [1].
inline constexpr char kCheckpointMagic[] = "MCTSNET1";
inline constexpr char kStepEntry[] = "meta.step";

void write_checkpoint(std::ostream& out, const ParamStore& store);
ParamStore read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
ParamStore load_checkpoint(const std::filesystem::path& path);

// Overwrites values in `store` from a checkpoint. Every parameter in the
// store must be present with an identical shape; a mismatch raises
// DimensionError/IoError naming the parameter.
void load_checkpoint_into(const std::filesystem::path& path, ParamStore& store);

}  // namespace mctsnet::nn
