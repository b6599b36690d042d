#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "shapeinst/tensor.hpp"

namespace shapeinst {

/// Flat little-endian binary container for an ordered tensor list.
///
/// Layout: 8-byte magic "SINSTNS1", u32 format version, u64 tensor count,
/// then per tensor: u32 rank, u64 extents[rank], f64 payload (row major).
/// The tensor order is the caller's contract; the network modules document
/// theirs.
void save_tensors(const std::filesystem::path& path, std::span<const Tensor> tensors);

/// Loads tensors saved by save_tensors. Loaded tensors require gradients
/// (they are parameters by construction).
std::vector<Tensor> load_tensors(const std::filesystem::path& path);

}  // namespace shapeinst
