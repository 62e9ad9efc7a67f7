#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "skytomo/common.hpp"

namespace skytomo {

struct VoxelCoord {
  int ix = 0;
  int iy = 0;
  int iz = 0;
  bool operator==(const VoxelCoord&) const = default;
};

/// Regular axis-aligned grid of rectangular voxels. Linear indices are x-fastest.
class VoxelGrid {
 public:
  VoxelGrid(int nx, int ny, int nz, const Vec3& origin, const Vec3& voxel_dims);

  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  int nz() const { return dims_[2]; }
  int dim(int axis) const { return dims_[axis]; }
  std::size_t size() const {
    return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  }

  const Vec3& origin() const { return origin_; }
  const Vec3& voxel_dims() const { return voxel_dims_; }
  Vec3 upper() const { return origin_ + extent(); }
  Vec3 extent() const {
    return {voxel_dims_[0] * dims_[0], voxel_dims_[1] * dims_[1], voxel_dims_[2] * dims_[2]};
  }
  double voxel_volume() const { return voxel_dims_[0] * voxel_dims_[1] * voxel_dims_[2]; }

  std::size_t linear_index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * dims_[1] + iy) * dims_[0] + ix;
  }
  std::size_t linear_index(const VoxelCoord& c) const { return linear_index(c.ix, c.iy, c.iz); }
  VoxelCoord unravel(std::size_t k) const;
  Vec3 center(std::size_t k) const;

  /// Containing voxel under the half-open convention [low, high); nullopt outside.
  std::optional<std::size_t> voxel_of_point(const Vec3& x) const;

  bool operator==(const VoxelGrid&) const = default;

 private:
  std::array<int, 3> dims_;
  Vec3 origin_;
  Vec3 voxel_dims_;
};

/// Optical properties of the single aerosol type. Cross sections in m^2.
struct AerosolOptics {
  std::array<double, kNumChannels> sigma = {17e-12, 17e-12, 17e-12};
  double albedo = 1.0;
  std::array<double, kNumChannels> g = {0.0, 0.0, 0.0};

  /// sigma_mu / sigma_G.
  double relative_sigma(int channel) const;
  bool operator==(const AerosolOptics&) const = default;
};

/// Per-voxel extinction fields. The aerosol field is stored in the green channel
/// only; the other channels follow from the cross-section ratios.
struct Medium {
  std::array<std::vector<double>, kNumChannels> beta_air;
  std::vector<double> beta_aerosol_green;
  AerosolOptics aerosol;
  double albedo_air = 1.0;

  static Medium empty(std::size_t n_voxels);

  double beta_aerosol(int channel, std::size_t k) const {
    return aerosol.relative_sigma(channel) * beta_aerosol_green[k];
  }
  double beta_total(int channel, std::size_t k) const {
    return beta_air[channel][k] + beta_aerosol(channel, k);
  }
  std::vector<double> aerosol_field(int channel) const;
  std::vector<double> total_field(int channel) const;

  /// Throws ValidationError naming the offending field.
  void validate(std::size_t n_voxels) const;

  bool operator==(const Medium&) const = default;
};

/// Hemispherical (equidistant fisheye) camera looking straight up.
///
/// Image-plane coordinates (u, v) span [-1, 1]^2; the zenith angle of a
/// direction is r * pi / 2 with r = |(u, v)|. A pixel is valid when its center
/// lies inside the unit image circle. Pixel values are averages over the pixel
/// square in (u, v).
class Camera {
 public:
  Camera(const Vec3& position, int width, int height);

  const Vec3& position() const { return position_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int num_pixels() const { return width_ * height_; }

  bool valid(int p) const;
  int num_valid() const;

  /// Image-plane coordinates of a point inside pixel p; (su, sv) in [0,1)^2.
  std::pair<double, double> image_coords(int p, double su, double sv) const;
  Vec3 direction(int p) const { return direction_at(image_coords(p, 0.5, 0.5)); }
  Vec3 direction_at(std::pair<double, double> uv) const;

  /// Image-plane coordinates of a viewing direction (inverse of direction_at).
  std::pair<double, double> project(const Vec3& dir) const;
  /// Pixel whose square contains the viewing direction; nullopt if none or invalid.
  std::optional<int> pixel_of(const Vec3& dir) const;

  /// Solid angle per unit image-plane area, dOmega / (du dv).
  static double jacobian(std::pair<double, double> uv);
  double pixel_area() const { return 4.0 / (static_cast<double>(width_) * height_); }

  bool operator==(const Camera& o) const {
    return position_ == o.position_ && width_ == o.width_ && height_ == o.height_;
  }

 private:
  Vec3 position_;
  int width_;
  int height_;
};

struct Sun {
  double zenith_deg = 45.0;
  double azimuth_deg = 0.0;
  std::array<double, kNumChannels> irradiance_ratio = {255.0, 236.0, 224.0};

  /// Propagation direction of sunlight (pointing down for zenith < 90).
  Vec3 direction() const;
  /// Relative irradiance normalized to the brightest channel.
  double irradiance(int channel) const;
  void validate() const;
  bool operator==(const Sun&) const = default;
};

struct Scene {
  VoxelGrid grid;
  Medium medium;
  std::vector<Camera> cameras;
  Sun sun;

  void validate() const;
  bool operator==(const Scene&) const = default;
};

// ---------------------------------------------------------------------------
// Generators

/// Molecular extinction beta0 * exp(-h / H) evaluated at voxel-center altitude.
struct AirProfile {
  std::array<double, kNumChannels> sea_level = {5.8e-6, 13.5e-6, 33.1e-6};
  double scale_height = 8000.0;
};

std::array<std::vector<double>, kNumChannels> make_air(const VoxelGrid& grid,
                                                       const AirProfile& profile);

struct Blob {
  Vec3 center;
  Vec3 radius;  // 1-sigma extent per axis, meters
  double amplitude = 1.0;
};

struct BlobParams {
  std::vector<Blob> blobs;
  double scale_height = 1200.0;
};

/// Aerosol particle density: Gaussian blobs times exp(-h / H), normalized so
/// the densest voxel holds exactly n_sealevel.
std::vector<double> haze_blobs_density(const VoxelGrid& grid, double n_sealevel,
                                       const BlobParams& params);

/// Medium with zero air whose green aerosol extinction is sigma_G * density.
Medium make_haze_blobs(const VoxelGrid& grid, double n_sealevel, const AerosolOptics& optics,
                       const BlobParams& params);

struct CylinderParams {
  double center_x = 0.0;
  double center_y = 0.0;
  double semi_axis_a = 10000.0;
  double semi_axis_b = 5000.0;
  double angle_deg = 0.0;
  double edge_width = 2000.0;  // cosine taper width outside the ellipse, meters
  double scale_height = 1200.0;
};

/// Vertical elliptic cylinder: n_sealevel * exp(-h / H) inside, cosine taper
/// to zero over edge_width outside the ellipse.
std::vector<double> haze_front_density(const VoxelGrid& grid, double n_sealevel,
                                       const CylinderParams& params);

Medium make_haze_front(const VoxelGrid& grid, double n_sealevel, const AerosolOptics& optics,
                       const CylinderParams& params);

// ---------------------------------------------------------------------------
// I/O

Scene load_scene(const std::filesystem::path& path);

enum class VolumeStorage { Inline, Raw };
void save_scene(const Scene& scene, const std::filesystem::path& path,
                VolumeStorage storage = VolumeStorage::Inline);

struct VolumeHeader {
  std::array<int, 3> dims{};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::string quantity;
  std::string channel;
};

/// Raw little-endian float32 volume (x-fastest) plus a JSON sidecar `<path>.json`.
void write_volume(const std::filesystem::path& path, std::span<const double> values,
                  const VolumeHeader& header);
std::vector<double> read_volume(const std::filesystem::path& path,
                                VolumeHeader* header = nullptr);
/// Raw float32 without a header; `expected` elements.
std::vector<double> read_raw_f32(const std::filesystem::path& path, std::size_t expected);

}  // namespace skytomo
