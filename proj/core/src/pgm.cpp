#include "shapeinst/pgm.hpp"

#include <fstream>
#include <string>

#include "shapeinst/errors.hpp"

namespace shapeinst {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    token += static_cast<char>(c);
  }
  return token;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const ImageU16& image) {
  if (image.pixels.size() != image.height * image.width)
    throw std::invalid_argument("write_pgm: pixel count does not match extents");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n65535\n";
  std::vector<unsigned char> bytes(image.pixels.size() * 2);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    bytes[2 * i] = static_cast<unsigned char>(image.pixels[i] >> 8);
    bytes[2 * i + 1] = static_cast<unsigned char>(image.pixels[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

ImageU16 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path.string());
  if (next_token(in) != "P5") throw DataError("not a binary PGM (P5): " + path.string());
  ImageU16 image;
  try {
    image.width = std::stoul(next_token(in));
    image.height = std::stoul(next_token(in));
    const unsigned long maxval = std::stoul(next_token(in));
    if (maxval != 65535)
      throw DataError("expected 16-bit PGM (maxval 65535), got maxval " +
                      std::to_string(maxval) + ": " + path.string());
  } catch (const std::logic_error&) {
    throw DataError("malformed PGM header: " + path.string());
  }
  std::vector<unsigned char> bytes(image.height * image.width * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw DataError("truncated PGM data: " + path.string());
  image.pixels.resize(image.height * image.width);
  for (std::size_t i = 0; i < image.pixels.size(); ++i)
    image.pixels[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  return image;
}

}  // namespace shapeinst
