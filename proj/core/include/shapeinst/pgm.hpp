#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace shapeinst {

/// Raw 16-bit grayscale image, row major.
struct ImageU16 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> pixels;

  std::uint16_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Binary PGM (P5), maxval 65535, big-endian samples per the format.
void write_pgm(const std::filesystem::path& path, const ImageU16& image);
ImageU16 read_pgm(const std::filesystem::path& path);

}  // namespace shapeinst
