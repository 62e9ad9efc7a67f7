#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <png.h>

#include "skytomo/image.hpp"

namespace skytomo {

namespace fs = std::filesystem;

void write_pfm(const fs::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  const bool little = std::endian::native == std::endian::little;
  out << "Pf\n" << image.width << ' ' << image.height << '\n' << (little ? "-1.0" : "1.0") << '\n';
  for (int j = 0; j < image.height; ++j) {
    for (int i = 0; i < image.width; ++i) {
      const auto f = static_cast<float>(image.pixels[static_cast<std::size_t>(j) * image.width + i]);
      out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
}

Image read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open '{}'", path.string()));
  std::string magic;
  int w = 0;
  int h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != "Pf" || w <= 0 || h <= 0 || scale == 0.0) {
    throw ParseError(fmt::format("{}: not a grayscale PFM", path.string()));
  }
  const bool file_little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;
  Image img(w, h);
  for (std::size_t p = 0; p < img.size(); ++p) {
    std::uint32_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw ParseError(fmt::format("{}: truncated pixel data", path.string()));
    }
    if (file_little != host_little) {
      bits = ((bits & 0xff) << 24) | ((bits & 0xff00) << 8) | ((bits >> 8) & 0xff00) | (bits >> 24);
    }
    img.pixels[p] = std::bit_cast<float>(bits);
  }
  return img;
}

void write_png16(const fs::path& path, const Image& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error(fmt::format("libpng error while writing '{}'", path.string()));
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 2);
  // PNG rows run top-down; image row 0 is the bottom (v = -1) row.
  for (int j = image.height - 1; j >= 0; --j) {
    for (int i = 0; i < image.width; ++i) {
      const double v = image.pixels[static_cast<std::size_t>(j) * image.width + i];
      const auto q = static_cast<std::uint16_t>(std::clamp(std::round(v), 0.0, 65535.0));
      row[2 * i] = static_cast<png_byte>(q >> 8);
      row[2 * i + 1] = static_cast<png_byte>(q & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string image_file_name(std::size_t camera, int channel, const char* extension) {
  return fmt::format("cam{}_{}.{}", camera, kChannelNames[channel], extension);
}

}  // namespace skytomo
