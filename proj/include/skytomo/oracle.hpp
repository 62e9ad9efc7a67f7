#pragma once

#include <span>
#include <vector>

#include "skytomo/image.hpp"
#include "skytomo/scene.hpp"

namespace skytomo {

struct SingleScatterOptions {
  int subsamples = 4;  // per axis, stratified over the pixel square
  int threads = 0;
};

/// Closed-form single-scatter image (sun -> one scatter -> camera, both paths
/// attenuated), excluding the direct solar term. Each voxel segment is
/// integrated with 4-point Gauss-Legendre quadrature.
Image render_single_scatter(const Scene& scene, int channel, std::size_t camera,
                            const SingleScatterOptions& options = {});

/// Single-scatter in-scatter field toward one camera, evaluated at voxel centers:
/// E * sum_i(beta_i albedo_i P_i) / beta * t_sun. Zero where beta = 0.
std::vector<double> single_scatter_field(const Scene& scene, int channel, std::size_t camera);

}  // namespace skytomo
