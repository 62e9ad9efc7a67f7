#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "skytomo/common.hpp"

namespace skytomo {

/// Single-channel image; pixel p = j * width + i (row j, column i).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return pixels.size(); }
  double& operator[](std::size_t p) { return pixels[p]; }
  double operator[](std::size_t p) const { return pixels[p]; }
  bool operator==(const Image&) const = default;
};

using ChannelImages = std::array<Image, kNumChannels>;
/// Images indexed [camera][channel].
using ImageSet = std::vector<ChannelImages>;

/// Per-pixel usage flags; 1 = pixel enters comparisons and the cost.
using PixelMask = std::vector<std::uint8_t>;

/// Grayscale portable float map ("Pf", little-endian, rows stored bottom-up).
void write_pfm(const std::filesystem::path& path, const Image& image);
Image read_pfm(const std::filesystem::path& path);

/// 16-bit grayscale PNG; values are rounded and clamped to [0, 65535].
void write_png16(const std::filesystem::path& path, const Image& image);

/// Standard per-camera file name: cam{c}_{channel}.pfm
std::string image_file_name(std::size_t camera, int channel, const char* extension = "pfm");

}  // namespace skytomo
