#pragma once

#include <cstdint>
#include <vector>

#include "skytomo/image.hpp"
#include "skytomo/scene.hpp"

namespace skytomo {

struct SensorModel {
  int bit_depth = 10;
  double read_noise = 0.4;  // graylevels, post-gain
  bool noise = true;

  double full_scale() const { return static_cast<double>(1u << bit_depth); }
};

struct Measurement {
  ImageSet graylevels;
  /// Graylevels per unit radiance; radiance = graylevel / gain.
  double gain = 0.0;
};

/// Global gain maps the brightest unmasked pixel (all cameras, all channels) to
/// full scale; then Gaussian read noise, clipping to [0, full scale] and rounding.
Measurement apply_sensor(const ImageSet& images, const std::vector<PixelMask>& masks,
                         const SensorModel& model, std::uint64_t seed);

/// 1 for pixels that are valid and at least `radius_deg` away from the sun.
PixelMask build_sun_mask(const Camera& camera, const Sun& sun, double radius_deg = 15.0);

std::vector<PixelMask> build_sun_masks(const Scene& scene, double radius_deg = 15.0);

/// Graylevels back to radiance.
ImageSet to_radiance(const Measurement& measurement);

}  // namespace skytomo
