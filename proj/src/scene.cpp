#include "skytomo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace skytomo {

int parse_channel(char name) {
  switch (name) {
    case 'R': case 'r': return 0;
    case 'G': case 'g': return 1;
    case 'B': case 'b': return 2;
    default: throw ValidationError("channel", std::string("unknown channel '") + name + "'");
  }
}

// ---------------------------------------------------------------------------
// VoxelGrid

VoxelGrid::VoxelGrid(int nx, int ny, int nz, const Vec3& origin, const Vec3& voxel_dims)
    : dims_{nx, ny, nz}, origin_(origin), voxel_dims_(voxel_dims) {
  if (nx < 1 || ny < 1 || nz < 1) {
    throw ValidationError("grid.shape", fmt::format("voxel counts must be >= 1, got {}x{}x{}", nx, ny, nz));
  }
  for (int a = 0; a < 3; ++a) {
    if (!(voxel_dims[a] > 0.0) || !std::isfinite(voxel_dims[a])) {
      throw ValidationError("grid.voxel_size", "voxel dimensions must be positive and finite");
    }
    if (!std::isfinite(origin[a])) throw ValidationError("grid.origin", "origin must be finite");
  }
}

VoxelCoord VoxelGrid::unravel(std::size_t k) const {
  const auto nx = static_cast<std::size_t>(dims_[0]);
  const auto ny = static_cast<std::size_t>(dims_[1]);
  return {static_cast<int>(k % nx), static_cast<int>((k / nx) % ny), static_cast<int>(k / (nx * ny))};
}

Vec3 VoxelGrid::center(std::size_t k) const {
  const VoxelCoord c = unravel(k);
  return origin_ + Vec3((c.ix + 0.5) * voxel_dims_[0], (c.iy + 0.5) * voxel_dims_[1],
                        (c.iz + 0.5) * voxel_dims_[2]);
}

std::optional<std::size_t> VoxelGrid::voxel_of_point(const Vec3& x) const {
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    const double f = (x[a] - origin_[a]) / voxel_dims_[a];
    if (!(f >= 0.0)) return std::nullopt;
    const double fl = std::floor(f);
    if (fl >= dims_[a]) return std::nullopt;
    idx[a] = static_cast<int>(fl);
  }
  return linear_index(idx[0], idx[1], idx[2]);
}

// ---------------------------------------------------------------------------
// Medium

double AerosolOptics::relative_sigma(int channel) const {
  if (!(sigma[1] > 0.0)) {
    throw ValidationError("aerosol.sigma", "green cross section must be positive");
  }
  return sigma[channel] / sigma[1];
}

Medium Medium::empty(std::size_t n_voxels) {
  Medium m;
  for (auto& ch : m.beta_air) ch.assign(n_voxels, 0.0);
  m.beta_aerosol_green.assign(n_voxels, 0.0);
  return m;
}

std::vector<double> Medium::aerosol_field(int channel) const {
  const double s = aerosol.relative_sigma(channel);
  std::vector<double> out(beta_aerosol_green.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = s * beta_aerosol_green[k];
  return out;
}

std::vector<double> Medium::total_field(int channel) const {
  const double s = aerosol.relative_sigma(channel);
  std::vector<double> out(beta_aerosol_green.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = beta_air[channel][k] + s * beta_aerosol_green[k];
  }
  return out;
}

namespace {

void check_field(std::span<const double> values, std::size_t n, const std::string& name) {
  if (values.size() != n) {
    throw ValidationError(name, fmt::format("expected {} voxels, got {}", n, values.size()));
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(values[k]) || values[k] < 0.0) {
      throw ValidationError(name, fmt::format("value {} at voxel {} must be finite and >= 0",
                                              values[k], k));
    }
  }
}

}  // namespace

void Medium::validate(std::size_t n_voxels) const {
  for (int c = 0; c < kNumChannels; ++c) {
    check_field(beta_air[c], n_voxels, fmt::format("beta_air[{}]", kChannelNames[c]));
  }
  check_field(beta_aerosol_green, n_voxels, "beta_aerosol");
  for (int c = 0; c < kNumChannels; ++c) {
    if (!(aerosol.sigma[c] > 0.0) || !std::isfinite(aerosol.sigma[c])) {
      throw ValidationError("aerosol.sigma", "cross sections must be positive");
    }
    if (!(std::abs(aerosol.g[c]) < 1.0)) {
      throw ValidationError("aerosol.g", "anisotropy must satisfy |g| < 1");
    }
  }
  if (!(aerosol.albedo >= 0.0 && aerosol.albedo <= 1.0)) {
    throw ValidationError("aerosol.albedo", "albedo must lie in [0, 1]");
  }
  if (!(albedo_air >= 0.0 && albedo_air <= 1.0)) {
    throw ValidationError("albedo_air", "albedo must lie in [0, 1]");
  }
}

// ---------------------------------------------------------------------------
// Camera

Camera::Camera(const Vec3& position, int width, int height)
    : position_(position), width_(width), height_(height) {
  if (width < 1 || height < 1) throw ValidationError("camera.pixels", "pixel counts must be >= 1");
  if (!position.allFinite()) throw ValidationError("camera.position", "position must be finite");
}

std::pair<double, double> Camera::image_coords(int p, double su, double sv) const {
  const int i = p % width_;
  const int j = p / width_;
  return {(i + su) * 2.0 / width_ - 1.0, (j + sv) * 2.0 / height_ - 1.0};
}

bool Camera::valid(int p) const {
  const auto [u, v] = image_coords(p, 0.5, 0.5);
  return u * u + v * v <= 1.0;
}

int Camera::num_valid() const {
  int n = 0;
  for (int p = 0; p < num_pixels(); ++p) n += valid(p) ? 1 : 0;
  return n;
}

Vec3 Camera::direction_at(std::pair<double, double> uv) const {
  const auto [u, v] = uv;
  const double r = std::hypot(u, v);
  const double theta = r * kPi / 2.0;
  const double phi = std::atan2(v, u);
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

std::pair<double, double> Camera::project(const Vec3& dir) const {
  const double theta = std::acos(std::clamp(dir.z(), -1.0, 1.0));
  const double r = 2.0 * theta / kPi;
  const double phi = std::atan2(dir.y(), dir.x());
  return {r * std::cos(phi), r * std::sin(phi)};
}

std::optional<int> Camera::pixel_of(const Vec3& dir) const {
  const auto [u, v] = project(dir);
  const double fi = (u + 1.0) * 0.5 * width_;
  const double fj = (v + 1.0) * 0.5 * height_;
  if (!(fi >= 0.0 && fj >= 0.0)) return std::nullopt;
  const int i = static_cast<int>(fi);
  const int j = static_cast<int>(fj);
  if (i >= width_ || j >= height_) return std::nullopt;
  const int p = j * width_ + i;
  if (!valid(p)) return std::nullopt;
  return p;
}

double Camera::jacobian(std::pair<double, double> uv) {
  const double r = std::hypot(uv.first, uv.second);
  if (r < 1e-12) return kPi * kPi / 4.0;
  return std::sin(r * kPi / 2.0) * (kPi / 2.0) / r;
}

// ---------------------------------------------------------------------------
// Sun and Scene

Vec3 Sun::direction() const {
  const double th = zenith_deg * kPi / 180.0;
  const double ph = azimuth_deg * kPi / 180.0;
  return -Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
}

double Sun::irradiance(int channel) const {
  const double peak = *std::max_element(irradiance_ratio.begin(), irradiance_ratio.end());
  return irradiance_ratio[channel] / peak;
}

void Sun::validate() const {
  if (!(zenith_deg >= 0.0 && zenith_deg < 90.0)) {
    throw ValidationError("sun.zenith_deg", "zenith must lie in [0, 90)");
  }
  if (!std::isfinite(azimuth_deg)) throw ValidationError("sun.azimuth_deg", "must be finite");
  for (double r : irradiance_ratio) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw ValidationError("sun.irradiance_ratio", "ratios must be positive");
    }
  }
}

void Scene::validate() const {
  medium.validate(grid.size());
  sun.validate();
  const Vec3 lo = grid.origin();
  const Vec3 hi = grid.upper();
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const Vec3& x = cameras[c].position();
    if (x.x() < lo.x() || x.x() > hi.x() || x.y() < lo.y() || x.y() > hi.y() || x.z() > hi.z()) {
      throw ValidationError(fmt::format("cameras[{}].position", c),
                            "camera must lie inside or below the domain footprint");
    }
  }
}

// ---------------------------------------------------------------------------
// Generators

std::array<std::vector<double>, kNumChannels> make_air(const VoxelGrid& grid,
                                                       const AirProfile& profile) {
  if (!(profile.scale_height > 0.0)) {
    throw ValidationError("beta_air.scale_height", "scale height must be positive");
  }
  std::array<std::vector<double>, kNumChannels> out;
  for (auto& ch : out) ch.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double h = grid.center(k).z();
    const double f = std::exp(-h / profile.scale_height);
    for (int c = 0; c < kNumChannels; ++c) out[c][k] = profile.sea_level[c] * f;
  }
  return out;
}

namespace {

void normalize_peak(std::vector<double>& density, double n_sealevel) {
  const double peak = density.empty() ? 0.0 : *std::max_element(density.begin(), density.end());
  if (peak <= 0.0) {
    std::fill(density.begin(), density.end(), 0.0);
    return;
  }
  const double s = n_sealevel / peak;
  for (double& d : density) d *= s;
}

Medium aerosol_medium(const VoxelGrid& grid, std::vector<double> density,
                      const AerosolOptics& optics) {
  Medium m = Medium::empty(grid.size());
  m.aerosol = optics;
  for (double& d : density) d *= optics.sigma[1];
  m.beta_aerosol_green = std::move(density);
  return m;
}

}  // namespace

std::vector<double> haze_blobs_density(const VoxelGrid& grid, double n_sealevel,
                                       const BlobParams& params) {
  if (!(n_sealevel > 0.0)) throw ValidationError("n_sealevel", "density must be positive");
  if (!(params.scale_height > 0.0)) {
    throw ValidationError("blobs.scale_height", "scale height must be positive");
  }
  const Vec3 lo = grid.origin();
  const Vec3 hi = grid.upper();
  for (std::size_t b = 0; b < params.blobs.size(); ++b) {
    const Blob& blob = params.blobs[b];
    for (int a = 0; a < 3; ++a) {
      if (blob.center[a] < lo[a] || blob.center[a] > hi[a]) {
        throw ValidationError(fmt::format("blobs[{}].center", b), "blob center outside grid");
      }
      if (!(blob.radius[a] > 0.0)) {
        throw ValidationError(fmt::format("blobs[{}].radius", b), "radius must be positive");
      }
    }
  }
  std::vector<double> density(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec3 x = grid.center(k);
    double sum = 0.0;
    for (const Blob& blob : params.blobs) {
      const Vec3 d = (x - blob.center).cwiseQuotient(blob.radius);
      sum += blob.amplitude * std::exp(-0.5 * d.squaredNorm());
    }
    density[k] = sum * std::exp(-x.z() / params.scale_height);
  }
  normalize_peak(density, n_sealevel);
  return density;
}

Medium make_haze_blobs(const VoxelGrid& grid, double n_sealevel, const AerosolOptics& optics,
                       const BlobParams& params) {
  return aerosol_medium(grid, haze_blobs_density(grid, n_sealevel, params), optics);
}

std::vector<double> haze_front_density(const VoxelGrid& grid, double n_sealevel,
                                       const CylinderParams& params) {
  if (!(n_sealevel > 0.0)) throw ValidationError("n_sealevel", "density must be positive");
  if (!(params.semi_axis_a > 0.0) || !(params.semi_axis_b > 0.0)) {
    throw ValidationError("cylinder.semi_axes", "ellipse semi-axes must be positive");
  }
  if (!(params.edge_width >= 0.0)) {
    throw ValidationError("cylinder.edge_width", "edge width must be >= 0");
  }
  if (!(params.scale_height > 0.0)) {
    throw ValidationError("cylinder.scale_height", "scale height must be positive");
  }
  const double ang = params.angle_deg * kPi / 180.0;
  const double ca = std::cos(ang);
  const double sa = std::sin(ang);
  std::vector<double> density(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec3 x = grid.center(k);
    const double dx = x.x() - params.center_x;
    const double dy = x.y() - params.center_y;
    const double xr = ca * dx + sa * dy;
    const double yr = -sa * dx + ca * dy;
    const double rho = std::hypot(xr / params.semi_axis_a, yr / params.semi_axis_b);
    double edge = 0.0;
    if (rho <= 1.0) {
      edge = 1.0;
    } else if (params.edge_width > 0.0) {
      // Distance beyond the boundary measured along the normalized radius.
      const double excess = (rho - 1.0) * std::min(params.semi_axis_a, params.semi_axis_b);
      if (excess < params.edge_width) edge = 0.5 * (1.0 + std::cos(kPi * excess / params.edge_width));
    }
    density[k] = n_sealevel * std::exp(-x.z() / params.scale_height) * edge;
  }
  return density;
}

Medium make_haze_front(const VoxelGrid& grid, double n_sealevel, const AerosolOptics& optics,
                       const CylinderParams& params) {
  return aerosol_medium(grid, haze_front_density(grid, n_sealevel, params), optics);
}

}  // namespace skytomo
