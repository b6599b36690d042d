#include "shapeinst/ply.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "shapeinst/errors.hpp"

namespace shapeinst {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

struct PlyHeader {
  std::size_t vertex_count = 0;
  std::vector<std::string> properties;  // in declaration order
};

PlyHeader read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || line != "ply")
    throw DataError("not a PLY file: " + path.string());
  if (!std::getline(in, line) || line.rfind("format ascii", 0) != 0)
    throw DataError("only ASCII PLY is supported: " + path.string());

  PlyHeader header;
  bool in_vertex_element = false;
  bool saw_vertex = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      if (!saw_vertex) throw DataError("PLY without a vertex element: " + path.string());
      return header;
    }
    std::istringstream words(line);
    std::string keyword;
    words >> keyword;
    if (keyword == "comment") continue;
    if (keyword == "element") {
      std::string name;
      std::size_t count = 0;
      words >> name >> count;
      if (name == "vertex") {
        header.vertex_count = count;
        in_vertex_element = true;
        saw_vertex = true;
      } else {
        throw DataError("unsupported PLY element '" + name + "' in " + path.string());
      }
    } else if (keyword == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      words >> type >> name;
      if (type == "list")
        throw DataError("list properties are not supported: " + path.string());
      if (type != "float" && type != "float32" && type != "double" && type != "float64")
        throw DataError("non-floating vertex property '" + name + "' in " + path.string());
      header.properties.push_back(name);
    }
  }
  throw DataError("PLY header not terminated: " + path.string());
}

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path,
                                           PlyHeader& header_out) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open PLY file: " + path.string());
  PlyHeader header = read_header(in, path);

  std::vector<std::vector<double>> rows(header.vertex_count,
                                        std::vector<double>(header.properties.size()));
  for (std::size_t i = 0; i < header.vertex_count; ++i) {
    for (std::size_t c = 0; c < header.properties.size(); ++c) {
      if (!(in >> rows[i][c]))
        throw DataError("truncated PLY data at vertex " + std::to_string(i) + ": " +
                        path.string());
    }
  }
  header_out = std::move(header);
  return rows;
}

std::size_t property_index(const PlyHeader& header, const std::string& name,
                           const std::filesystem::path& path) {
  for (std::size_t i = 0; i < header.properties.size(); ++i)
    if (header.properties[i] == name) return i;
  throw DataError("PLY missing property '" + name + "': " + path.string());
}

void write_body(const std::filesystem::path& path, const PointCloud& cloud,
                std::span<const double> quality) {
  std::string out;
  out.reserve(cloud.size() * 64 + 128);
  out += "ply\nformat ascii 1.0\nelement vertex ";
  out += std::to_string(cloud.size());
  out += "\nproperty double x\nproperty double y\nproperty double z\n";
  if (!quality.empty()) out += "property double quality\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    append_double(out, p[0]);
    out += ' ';
    append_double(out, p[1]);
    out += ' ';
    append_double(out, p[2]);
    if (!quality.empty()) {
      out += ' ';
      append_double(out, quality[i]);
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw DataError("cannot open for writing: " + path.string());
  file << out;
  if (!file) throw DataError("write failed: " + path.string());
}

}  // namespace

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  write_body(path, cloud, {});
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               std::span<const double> quality) {
  if (quality.size() != cloud.size())
    throw std::invalid_argument("write_ply: quality count " + std::to_string(quality.size()) +
                                " does not match vertex count " + std::to_string(cloud.size()));
  write_body(path, cloud, quality);
}

PointCloud read_ply(const std::filesystem::path& path) {
  PlyHeader header;
  const auto rows = read_rows(path, header);
  const std::size_t ix = property_index(header, "x", path);
  const std::size_t iy = property_index(header, "y", path);
  const std::size_t iz = property_index(header, "z", path);
  PointCloud cloud;
  cloud.points.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    cloud.points[i] = {rows[i][ix], rows[i][iy], rows[i][iz]};
  return cloud;
}

std::vector<double> read_ply_quality(const std::filesystem::path& path) {
  PlyHeader header;
  const auto rows = read_rows(path, header);
  for (std::size_t c = 0; c < header.properties.size(); ++c) {
    if (header.properties[c] == "quality") {
      std::vector<double> q(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) q[i] = rows[i][c];
      return q;
    }
  }
  return {};
}

}  // namespace shapeinst
