#include "skytomo/optics.hpp"

#include <fmt/format.h>

namespace skytomo {

double phase_hg(double mu, double g) {
  if (!(std::abs(g) < 1.0)) {
    throw std::domain_error(fmt::format("phase_hg: |g| must be < 1, got {}", g));
  }
  const double g2 = g * g;
  const double denom = 1.0 + g2 - 2.0 * g * mu;
  return kInvFourPi * (1.0 - g2) / (denom * std::sqrt(denom));
}

double sample_tau(double u) {
  if (!(u >= 0.0 && u < 1.0)) {
    throw std::domain_error(fmt::format("sample_tau: u must lie in [0, 1), got {}", u));
  }
  return -std::log1p(-u);
}

double hg_cos_from_uniform(double g, double u) {
  if (std::abs(g) < 1e-6) return 2.0 * u - 1.0;
  const double g2 = g * g;
  const double s = (1.0 - g2) / (1.0 - g + 2.0 * g * u);
  return std::clamp((1.0 + g2 - s * s) / (2.0 * g), -1.0, 1.0);
}

double rayleigh_cos_from_uniform(double u) {
  const double a = 4.0 * u - 2.0;
  const double gamma = a + std::sqrt(a * a + 1.0);
  const double c = std::cbrt(gamma);
  return std::clamp(c - 1.0 / c, -1.0, 1.0);
}

std::pair<Vec3, Vec3> orthonormal_frame(const Vec3& n) {
  const Vec3 a = n.cwiseAbs();
  Vec3 seed = Vec3::UnitX();
  if (a.y() < a.x() && a.y() <= a.z()) {
    seed = Vec3::UnitY();
  } else if (a.z() < a.x() && a.z() < a.y()) {
    seed = Vec3::UnitZ();
  }
  const Vec3 t1 = n.cross(seed).normalized();
  return {t1, n.cross(t1)};
}

ScatterSample scatter_around(const Vec3& psi, double cos_angle, double u_azimuth) {
  const double phi = 2.0 * kPi * u_azimuth;
  const double sin_angle = std::sqrt(std::max(0.0, 1.0 - cos_angle * cos_angle));
  const auto [t1, t2] = orthonormal_frame(psi);
  Vec3 dir = sin_angle * std::cos(phi) * t1 + sin_angle * std::sin(phi) * t2 + cos_angle * psi;
  dir.normalize();
  return {dir, std::acos(cos_angle), phi};
}

ScatterSample sample_hg_direction(const Vec3& psi, double g, double u1, double u2) {
  return scatter_around(psi, hg_cos_from_uniform(g, u1), u2);
}

ScatterSample sample_rayleigh_direction(const Vec3& psi, double u1, double u2) {
  return scatter_around(psi, rayleigh_cos_from_uniform(u1), u2);
}

std::optional<std::pair<double, double>> clip_ray(const VoxelGrid& grid, const Vec3& o,
                                                  const Vec3& d, double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  const Vec3 lo = grid.origin();
  const Vec3 hi = grid.upper();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / d[a];
    double ta = (lo[a] - o[a]) * inv;
    double tb = (hi[a] - o[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::make_pair(t0, t1);
}

RaySegmentList traverse(const VoxelGrid& grid, const Vec3& o, const Vec3& d, double t_max) {
  RaySegmentList out;
  if (const auto span = clip_ray(grid, o, d, t_max)) {
    out.t_enter = span->first;
    out.t_exit = span->second;
  }
  walk_ray(grid, o, d, t_max, [&](std::size_t k, double t0, double t1) {
    out.segments.push_back({k, t1 - t0});
    return true;
  });
  return out;
}

double optical_depth(std::span<const double> beta, const RaySegmentList& path) {
  double tau = 0.0;
  for (const Segment& s : path.segments) tau += beta[s.voxel] * s.length;
  return tau;
}

double optical_depth_along(const VoxelGrid& grid, std::span<const double> beta, const Vec3& o,
                           const Vec3& d, double t_max) {
  double tau = 0.0;
  walk_ray(grid, o, d, t_max, [&](std::size_t k, double t0, double t1) {
    tau += beta[k] * (t1 - t0);
    return true;
  });
  return tau;
}

MarchResult march_to_tau(const VoxelGrid& grid, std::span<const double> beta, const Vec3& o,
                         const Vec3& d, double tau_target) {
  MarchResult result;
  double tau = 0.0;
  double t_last = 0.0;
  bool stopped = false;
  walk_ray(grid, o, d, std::numeric_limits<double>::infinity(),
           [&](std::size_t k, double t0, double t1) {
             t_last = t1;
             const double b = beta[k];
             if (b <= 0.0) return true;
             const double dtau = b * (t1 - t0);
             if (tau + dtau >= tau_target) {
               const double t = std::min(t1, t0 + (tau_target - tau) / b);
               result.distance = t;
               result.voxel = k;
               stopped = true;
               return false;
             }
             tau += dtau;
             return true;
           });
  if (!stopped) {
    result.escaped = true;
    result.distance = t_last;
  }
  result.position = o + result.distance * d;
  return result;
}

}  // namespace skytomo
