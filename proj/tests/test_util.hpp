#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "skytomo/presets.hpp"
#include "skytomo/scene.hpp"

namespace skytomo::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("skytomo_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Scene vacuum_scene(int n, double edge, std::vector<Camera> cameras) {
  VoxelGrid grid(n, n, n, Vec3::Zero(), Vec3(edge, edge, edge));
  return Scene{grid, Medium::empty(grid.size()), std::move(cameras), Sun{}};
}

/// Optically thin blob (max tau well below 0.05) seen by one camera under the grid.
inline Scene thin_scene(int n = 16, int pixels = 16, const AerosolOptics& optics = type6_aerosol()) {
  VoxelGrid grid(n, n, n, Vec3::Zero(), Vec3(4000.0 / n, 4000.0 / n, 2000.0 / n));
  BlobParams b;
  b.blobs = {{Vec3(2000, 2000, 1000), Vec3(800, 800, 500), 1.0}};
  b.scale_height = 1e9;
  Medium m = make_haze_blobs(grid, 1e6, optics, b);
  m.beta_air = make_air(grid, AirProfile{});
  return Scene{grid, m, {Camera(Vec3(2000, 2000, -500), pixels, pixels)}, Sun{}};
}

}  // namespace skytomo::testing
