#include "shapeinst/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "shapeinst/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "the parameter file format is little-endian; big-endian hosts are unsupported");

namespace shapeinst {

namespace {

constexpr char kMagic[8] = {'S', 'I', 'N', 'S', 'T', 'N', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("truncated tensor file: " + path.string());
  return value;
}

}  // namespace

void save_tensors(const std::filesystem::path& path, std::span<const Tensor> tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint64_t>(tensors.size()));
  for (const Tensor& t : tensors) {
    write_raw(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t extent : t.shape()) write_raw(out, static_cast<std::uint64_t>(extent));
    std::span<const double> data = t.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Tensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a tensor file (bad magic): " + path.string());
  const auto version = read_raw<std::uint32_t>(in, path);
  if (version != kVersion)
    throw DataError("unsupported tensor file version " + std::to_string(version) + ": " +
                    path.string());
  const auto count = read_raw<std::uint64_t>(in, path);
  std::vector<Tensor> tensors;
  tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto rank = read_raw<std::uint32_t>(in, path);
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d)
      shape[d] = static_cast<std::size_t>(read_raw<std::uint64_t>(in, path));
    std::vector<double> data(shape_numel(shape));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw DataError("truncated tensor file: " + path.string());
    tensors.push_back(Tensor::from_data(std::move(shape), std::move(data), true));
  }
  return tensors;
}

}  // namespace shapeinst
