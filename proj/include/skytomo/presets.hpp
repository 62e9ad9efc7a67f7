#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "skytomo/scene.hpp"

namespace skytomo {

AerosolOptics isotropic_aerosol();
/// Anisotropic continental aerosol (type 6).
AerosolOptics type6_aerosol();

/// per_side x per_side upward cameras with the given spacing, centered on (cx, cy).
std::vector<Camera> camera_grid(int per_side, double spacing, double cx, double cy, double z,
                                int pixels);

struct PresetOptions {
  int nx = 24;
  int ny = 24;
  int nz = 24;
  int pixels = 32;
  /// Overrides the grid to 80x80x120 and the cameras to 64x64 pixels.
  bool paper_scale = false;
};

/// atm1 | atm2 | atm3 | atm4 on the 50 x 50 x 10 km domain with 36 ground cameras,
/// or the toy layouts toy-conditioning (centered ellipsoid, 25 cameras) and
/// toy-recovery (12^3 grid, 9 cameras, optically thick blobs).
Scene make_preset(std::string_view name, const PresetOptions& options = {});

std::vector<std::string> preset_names();

/// Default blob layout of the haze-blob atmospheres, scaled to the domain.
BlobParams default_blobs(const VoxelGrid& grid);

}  // namespace skytomo
