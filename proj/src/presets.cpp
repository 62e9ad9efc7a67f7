#include "skytomo/presets.hpp"

#include <fmt/format.h>

namespace skytomo {

namespace {

constexpr double kDomainXY = 50000.0;
constexpr double kDomainZ = 10000.0;

VoxelGrid make_grid(int nx, int ny, int nz, double lx, double ly, double lz) {
  if (nx < 1 || ny < 1 || nz < 1) throw ValidationError("grid", "dimensions must be >= 1");
  return VoxelGrid(nx, ny, nz, Vec3::Zero(), Vec3(lx / nx, ly / ny, lz / nz));
}

Medium with_air(Medium m, const VoxelGrid& grid) {
  m.beta_air = make_air(grid, AirProfile{});
  return m;
}

}  // namespace

AerosolOptics isotropic_aerosol() {
  AerosolOptics a;
  a.sigma = {17e-12, 17e-12, 17e-12};
  a.albedo = 1.0;
  a.g = {0.0, 0.0, 0.0};
  return a;
}

AerosolOptics type6_aerosol() {
  AerosolOptics a;
  a.sigma = {16.5e-12, 16.2e-12, 15.9e-12};
  a.albedo = 1.0;
  a.g = {0.763, 0.775, 0.786};
  return a;
}

std::vector<Camera> camera_grid(int per_side, double spacing, double cx, double cy, double z,
                                int pixels) {
  std::vector<Camera> cams;
  const double half = 0.5 * (per_side - 1);
  for (int j = 0; j < per_side; ++j) {
    for (int i = 0; i < per_side; ++i) {
      cams.emplace_back(Vec3(cx + (i - half) * spacing, cy + (j - half) * spacing, z), pixels,
                        pixels);
    }
  }
  return cams;
}

BlobParams default_blobs(const VoxelGrid& grid) {
  const Vec3 lo = grid.origin();
  const Vec3 ext = grid.extent();
  auto at = [&](double fx, double fy, double fz) {
    return Vec3(lo.x() + fx * ext.x(), lo.y() + fy * ext.y(), lo.z() + fz * ext.z());
  };
  BlobParams p;
  p.blobs = {
      {at(0.32, 0.36, 0.06), Vec3(0.12 * ext.x(), 0.10 * ext.y(), 0.08 * ext.z()), 1.0},
      {at(0.66, 0.58, 0.10), Vec3(0.10 * ext.x(), 0.13 * ext.y(), 0.10 * ext.z()), 0.8},
      {at(0.45, 0.74, 0.04), Vec3(0.08 * ext.x(), 0.08 * ext.y(), 0.06 * ext.z()), 0.6},
  };
  p.scale_height = 1200.0;
  return p;
}

std::vector<std::string> preset_names() {
  return {"atm1", "atm2", "atm3", "atm4", "toy-conditioning", "toy-recovery"};
}

Scene make_preset(std::string_view name, const PresetOptions& options) {
  int nx = options.nx;
  int ny = options.ny;
  int nz = options.nz;
  int pixels = options.pixels;
  if (options.paper_scale) {
    nx = 80;
    ny = 80;
    nz = 120;
    pixels = 64;
  }
  if (pixels < 1) throw ValidationError("pixels", "must be >= 1");

  if (name == "atm1" || name == "atm2" || name == "atm3" || name == "atm4") {
    const VoxelGrid grid = make_grid(nx, ny, nz, kDomainXY, kDomainXY, kDomainZ);
    const AerosolOptics optics = name == "atm1" ? isotropic_aerosol() : type6_aerosol();
    const double n_sealevel = name == "atm3" ? 1e7 : 1e6;
    Medium medium;
    if (name == "atm4") {
      CylinderParams cyl;
      cyl.center_x = 0.35 * kDomainXY;
      cyl.center_y = 0.5 * kDomainXY;
      cyl.semi_axis_a = 0.45 * kDomainXY;
      cyl.semi_axis_b = 0.12 * kDomainXY;
      cyl.angle_deg = 70.0;
      medium = make_haze_front(grid, n_sealevel, optics, cyl);
    } else {
      medium = make_haze_blobs(grid, n_sealevel, optics, default_blobs(grid));
    }
    Scene scene{grid, with_air(std::move(medium), grid),
                camera_grid(6, 7000.0, 0.5 * kDomainXY, 0.5 * kDomainXY, 0.0, pixels), Sun{}};
    scene.validate();
    return scene;
  }

  if (name == "toy-conditioning") {
    const VoxelGrid grid = make_grid(nx, ny, nz, kDomainXY, kDomainXY, kDomainZ);
    BlobParams ellipsoid;
    ellipsoid.blobs = {{Vec3(0.5 * kDomainXY, 0.5 * kDomainXY, 5000.0),
                        Vec3(6000.0, 6000.0, 1250.0), 1.0}};
    ellipsoid.scale_height = 1e9;
    Medium medium = make_haze_blobs(grid, 1e7, isotropic_aerosol(), ellipsoid);
    Scene scene{grid, with_air(std::move(medium), grid),
                camera_grid(5, 9000.0, 0.5 * kDomainXY, 0.5 * kDomainXY, 0.0, pixels), Sun{}};
    scene.validate();
    return scene;
  }

  if (name == "toy-recovery") {
    const double lx = 6000.0;
    const double lz = 3000.0;
    const VoxelGrid grid = make_grid(12, 12, 12, lx, lx, lz);
    BlobParams blobs;
    blobs.blobs = {{Vec3(2500.0, 3500.0, 900.0), Vec3(900.0, 900.0, 450.0), 1.0},
                   {Vec3(4000.0, 2300.0, 1300.0), Vec3(700.0, 800.0, 400.0), 0.7}};
    blobs.scale_height = 1200.0;
    Medium medium = make_haze_blobs(grid, 1e8, isotropic_aerosol(), blobs);
    Scene scene{grid, with_air(std::move(medium), grid),
                camera_grid(3, 2000.0, 0.5 * lx, 0.5 * lx, 0.0, pixels), Sun{}};
    scene.validate();
    return scene;
  }

  throw ValidationError("preset", fmt::format("unknown preset '{}'", name));
}

}  // namespace skytomo
