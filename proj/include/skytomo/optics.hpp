#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "skytomo/common.hpp"
#include "skytomo/scene.hpp"

namespace skytomo {

// ---------------------------------------------------------------------------
// Phase functions and samplers

/// Henyey-Greenstein density per steradian. Requires |g| < 1.
double phase_hg(double mu, double g);

/// Rayleigh density per steradian.
inline double phase_rayleigh(double mu) { return 3.0 / (16.0 * kPi) * (1.0 + mu * mu); }

/// Exponential free-path sample, tau = -ln(1 - u). Requires 0 <= u < 1.
double sample_tau(double u);

/// Inverse CDF of the HG phase function in mu = cos(angle).
double hg_cos_from_uniform(double g, double u);
/// Inverse CDF of the Rayleigh phase function (Cardano root of mu^3 + 3 mu = 8u - 4).
double rayleigh_cos_from_uniform(double u);

struct ScatterSample {
  Vec3 direction;
  double angle = 0.0;    // off-axis angle relative to the incoming direction
  double azimuth = 0.0;  // in [0, 2 pi)
};

/// Deterministic orthonormal frame (t1, t2) perpendicular to unit vector n.
std::pair<Vec3, Vec3> orthonormal_frame(const Vec3& n);

/// Rotates (cos angle, azimuth) into the frame of psi.
ScatterSample scatter_around(const Vec3& psi, double cos_angle, double u_azimuth);

ScatterSample sample_hg_direction(const Vec3& psi, double g, double u1, double u2);
ScatterSample sample_rayleigh_direction(const Vec3& psi, double u1, double u2);

// ---------------------------------------------------------------------------
// Grid traversal

struct Segment {
  std::size_t voxel = 0;
  double length = 0.0;
};

/// Ordered voxel segments of a ray through the grid.
struct RaySegmentList {
  std::vector<Segment> segments;
  double t_enter = 0.0;
  double t_exit = 0.0;

  double total_length() const {
    double s = 0.0;
    for (const Segment& seg : segments) s += seg.length;
    return s;
  }
  bool empty() const { return segments.empty(); }
};

/// Parametric interval [t0, t1] of the ray o + t d (t in [0, t_max]) inside the
/// grid box; nullopt if it misses.
std::optional<std::pair<double, double>> clip_ray(const VoxelGrid& grid, const Vec3& o,
                                                  const Vec3& d, double t_max);

/// Incremental per-axis boundary stepping. Calls visit(k, t0, t1) for every
/// voxel crossed with t1 > t0, in order; stops early when visit returns false.
template <typename Visitor>
void walk_ray(const VoxelGrid& grid, const Vec3& o, const Vec3& d, double t_max, Visitor&& visit) {
  const auto span = clip_ray(grid, o, d, t_max);
  if (!span) return;
  const auto [t_enter, t_exit] = *span;

  const Vec3& org = grid.origin();
  const Vec3& size = grid.voxel_dims();
  int idx[3];
  int step[3];
  double t_next[3];
  const Vec3 entry = o + t_enter * d;
  for (int a = 0; a < 3; ++a) {
    const int n = grid.dim(a);
    int i = static_cast<int>(std::floor((entry[a] - org[a]) / size[a]));
    idx[a] = std::clamp(i, 0, n - 1);
    if (d[a] > 0.0) {
      step[a] = 1;
      t_next[a] = (org[a] + (idx[a] + 1) * size[a] - o[a]) / d[a];
    } else if (d[a] < 0.0) {
      step[a] = -1;
      t_next[a] = (org[a] + idx[a] * size[a] - o[a]) / d[a];
    } else {
      step[a] = 0;
      t_next[a] = std::numeric_limits<double>::infinity();
    }
  }

  double t = t_enter;
  while (true) {
    int axis = 0;
    if (t_next[1] < t_next[axis]) axis = 1;
    if (t_next[2] < t_next[axis]) axis = 2;
    const double t_end = std::min(t_next[axis], t_exit);
    if (t_end > t) {
      if (!visit(grid.linear_index(idx[0], idx[1], idx[2]), t, t_end)) return;
      t = t_end;
    }
    if (t_next[axis] >= t_exit) return;
    idx[axis] += step[axis];
    if (idx[axis] < 0 || idx[axis] >= grid.dim(axis)) return;
    t_next[axis] = step[axis] > 0 ? (org[axis] + (idx[axis] + 1) * size[axis] - o[axis]) / d[axis]
                                  : (org[axis] + idx[axis] * size[axis] - o[axis]) / d[axis];
  }
}

/// Exact segment list along o + t d, t in [0, t_max]. Empty if the ray misses.
RaySegmentList traverse(const VoxelGrid& grid, const Vec3& o, const Vec3& d,
                        double t_max = std::numeric_limits<double>::infinity());

// ---------------------------------------------------------------------------
// Optical depth

double optical_depth(std::span<const double> beta, const RaySegmentList& path);

/// Optical depth along o + t d for t in [0, t_max], without materializing segments.
double optical_depth_along(const VoxelGrid& grid, std::span<const double> beta, const Vec3& o,
                           const Vec3& d,
                           double t_max = std::numeric_limits<double>::infinity());

inline double transmittance(double tau) { return std::exp(-tau); }

struct MarchResult {
  bool escaped = false;
  Vec3 position = Vec3::Zero();  // stop point, or exit point when escaped
  std::size_t voxel = 0;         // meaningful only when !escaped
  double distance = 0.0;
};

/// Walks from o along d until the accumulated optical depth reaches tau_target.
/// Voids (beta = 0) are crossed without stopping.
MarchResult march_to_tau(const VoxelGrid& grid, std::span<const double> beta, const Vec3& o,
                         const Vec3& d, double tau_target);

}  // namespace skytomo
