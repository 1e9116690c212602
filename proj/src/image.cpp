#include "tactwin/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "tactwin/errors.hpp"

namespace tactwin {
namespace {

std::uint16_t quantize(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
}

// Skips whitespace and '#' comments in a PNM header.
void skip_header_space(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

void write_pgm16(const std::filesystem::path& path, const TactileImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width) * 2);
  for (int r = image.height - 1; r >= 0; --r) {
    for (int c = 0; c < image.width; ++c) {
      const std::uint16_t v = quantize(image.at(r, c));
      row[2 * c] = static_cast<unsigned char>(v >> 8);
      row[2 * c + 1] = static_cast<unsigned char>(v & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

TactileImage read_pgm16(const std::filesystem::path& path, double scale_mm_per_px,
                        bool is_reference) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError(path.string() + ": not a binary PGM");
  int width = 0, height = 0, maxval = 0;
  skip_header_space(in);
  in >> width;
  skip_header_space(in);
  in >> height;
  skip_header_space(in);
  in >> maxval;
  in.get();
  if (!in || width <= 0 || height <= 0 || maxval != 65535) {
    throw IoError(path.string() + ": unsupported PGM header (need 16-bit, maxval 65535)");
  }
  TactileImage img(width, height, scale_mm_per_px);
  img.is_reference = is_reference;
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
  for (int r = height - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw IoError(path.string() + ": truncated pixel data");
    for (int c = 0; c < width; ++c) {
      const int v = (row[2 * c] << 8) | row[2 * c + 1];
      img.at(r, c) = v / 65535.0;
    }
  }
  return img;
}

}  // namespace tactwin
