#include "skytomo/oracle.hpp"

#include <array>
#include <cmath>

#include "skytomo/optics.hpp"
#include "skytomo/parallel.hpp"

namespace skytomo {

namespace {

constexpr std::array<double, 4> kGaussNodes = {-0.8611363115940526, -0.3399810435848563,
                                               0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGaussWeights = {0.3478548451374538, 0.6521451548625461,
                                                 0.6521451548625461, 0.3478548451374538};

/// beta-weighted albedo-phase sum at voxel k for scattering cosine mu.
double scattering_kernel(const Medium& medium, int channel, std::size_t k, double mu) {
  const double air = medium.beta_air[channel][k] * medium.albedo_air * phase_rayleigh(mu);
  const double b_aer = medium.beta_aerosol(channel, k);
  const double aer =
      b_aer > 0.0 ? b_aer * medium.aerosol.albedo * phase_hg(mu, medium.aerosol.g[channel]) : 0.0;
  return air + aer;
}

}  // namespace

Image render_single_scatter(const Scene& scene, int channel, std::size_t camera,
                            const SingleScatterOptions& options) {
  if (camera >= scene.cameras.size()) throw ValidationError("camera", "index out of range");
  if (options.subsamples < 1) throw ValidationError("subsamples", "must be >= 1");
  const Camera& cam = scene.cameras[camera];
  const VoxelGrid& grid = scene.grid;
  const Medium& medium = scene.medium;
  const std::vector<double> beta = medium.total_field(channel);
  const Vec3 sun_dir = scene.sun.direction();
  const double irradiance = scene.sun.irradiance(channel);
  const int ns = options.subsamples;

  Image img(cam.width(), cam.height());
  parallel_for(static_cast<std::size_t>(cam.num_pixels()), resolve_threads(options.threads),
               [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    if (!cam.valid(p)) return;
    double sum = 0.0;
    for (int a = 0; a < ns; ++a) {
      for (int b = 0; b < ns; ++b) {
        const Vec3 d = cam.direction_at(cam.image_coords(p, (a + 0.5) / ns, (b + 0.5) / ns));
        const double mu = -sun_dir.dot(d);
        double tau_cam = 0.0;
        walk_ray(grid, cam.position(), d, std::numeric_limits<double>::infinity(),
                 [&](std::size_t k, double t0, double t1) {
                   const double bk = beta[k];
                   if (bk <= 0.0) return true;
                   const double kernel = scattering_kernel(medium, channel, k, mu);
                   const double half = 0.5 * (t1 - t0);
                   const double mid = 0.5 * (t0 + t1);
                   double seg = 0.0;
                   for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
                     const double t = mid + half * kGaussNodes[q];
                     const Vec3 x = cam.position() + t * d;
                     const double t_cam = std::exp(-(tau_cam + bk * (t - t0)));
                     const double t_sun = std::exp(-optical_depth_along(grid, beta, x, -sun_dir));
                     seg += kGaussWeights[q] * t_cam * t_sun;
                   }
                   sum += irradiance * kernel * half * seg;
                   tau_cam += bk * (t1 - t0);
                   return true;
                 });
      }
    }
    img[pi] = sum / (ns * ns);
  });
  return img;
}

std::vector<double> single_scatter_field(const Scene& scene, int channel, std::size_t camera) {
  if (camera >= scene.cameras.size()) throw ValidationError("camera", "index out of range");
  const VoxelGrid& grid = scene.grid;
  const Medium& medium = scene.medium;
  const std::vector<double> beta = medium.total_field(channel);
  const Vec3 sun_dir = scene.sun.direction();
  const Vec3& cam = scene.cameras[camera].position();
  const double irradiance = scene.sun.irradiance(channel);
  std::vector<double> j(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(beta[k] > 0.0)) continue;
    const Vec3 x = grid.center(k);
    const Vec3 v = cam - x;
    const double r = v.norm();
    const double mu = r > 0.0 ? sun_dir.dot(v / r) : 1.0;
    const double t_sun = std::exp(-optical_depth_along(grid, beta, x, -sun_dir));
    j[k] = irradiance * scattering_kernel(medium, channel, k, mu) / beta[k] * t_sun;
  }
  return j;
}

}  // namespace skytomo
