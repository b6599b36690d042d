#pragma once

#include <filesystem>
#include <span>

#include "shapeinst/geometry.hpp"

namespace shapeinst {

/// ASCII PLY with a single vertex element and double-typed x, y, z
/// properties. Coordinates are printed with 17 significant digits so a
/// write/read round trip is bit-exact.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

/// Same, plus a per-vertex scalar "quality" property.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               std::span<const double> quality);

/// Reads an ASCII vertex-only PLY. Accepts float/double-typed properties;
/// properties other than x, y, z are parsed and discarded.
PointCloud read_ply(const std::filesystem::path& path);

/// Reads the "quality" property column, if present (empty otherwise).
std::vector<double> read_ply_quality(const std::filesystem::path& path);

}  // namespace shapeinst
