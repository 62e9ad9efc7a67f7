#include "skytomo/sensor.hpp"

#include <algorithm>
#include <cmath>

#include "skytomo/rng.hpp"

namespace skytomo {

Measurement apply_sensor(const ImageSet& images, const std::vector<PixelMask>& masks,
                         const SensorModel& model, std::uint64_t seed) {
  if (masks.size() != images.size()) {
    throw ValidationError("masks", "need one mask per camera");
  }
  if (model.bit_depth < 1 || model.bit_depth > 16) {
    throw ValidationError("bit_depth", "must be in [1, 16]");
  }
  if (model.read_noise < 0.0) throw ValidationError("read_noise", "must be >= 0");
  double peak = 0.0;
  for (std::size_t c = 0; c < images.size(); ++c) {
    for (const Image& img : images[c]) {
      if (masks[c].size() != img.size()) throw ValidationError("masks", "mask size mismatch");
      for (std::size_t p = 0; p < img.size(); ++p) {
        if (masks[c][p]) peak = std::max(peak, img[p]);
      }
    }
  }
  if (!(peak > 0.0)) {
    throw ValidationError("images", "no unmasked pixel with positive radiance");
  }
  const double full = model.full_scale();
  Measurement out;
  out.gain = full / peak;
  out.graylevels = images;
  Rng rng(seed, 0);
  for (ChannelImages& cam : out.graylevels) {
    for (Image& img : cam) {
      for (double& v : img.pixels) {
        double x = v * out.gain;
        if (model.noise) x += model.read_noise * rng.normal();
        v = std::round(std::clamp(x, 0.0, full));
      }
    }
  }
  return out;
}

PixelMask build_sun_mask(const Camera& camera, const Sun& sun, double radius_deg) {
  if (!(radius_deg >= 0.0)) throw ValidationError("sun_mask_radius", "must be >= 0");
  const Vec3 to_sun = -sun.direction();
  const double limit = radius_deg * kPi / 180.0;
  PixelMask mask(static_cast<std::size_t>(camera.num_pixels()), 0);
  if (radius_deg >= 180.0) return mask;
  for (int p = 0; p < camera.num_pixels(); ++p) {
    if (!camera.valid(p)) continue;
    const double angle = std::acos(std::clamp(camera.direction(p).dot(to_sun), -1.0, 1.0));
    mask[static_cast<std::size_t>(p)] = angle >= limit ? 1 : 0;
  }
  return mask;
}

std::vector<PixelMask> build_sun_masks(const Scene& scene, double radius_deg) {
  std::vector<PixelMask> masks;
  masks.reserve(scene.cameras.size());
  for (const Camera& cam : scene.cameras) masks.push_back(build_sun_mask(cam, scene.sun, radius_deg));
  return masks;
}

ImageSet to_radiance(const Measurement& measurement) {
  if (!(measurement.gain > 0.0)) throw ValidationError("gain", "must be > 0");
  ImageSet out = measurement.graylevels;
  for (ChannelImages& cam : out) {
    for (Image& img : cam) {
      for (double& v : img.pixels) v /= measurement.gain;
    }
  }
  return out;
}

}  // namespace skytomo
