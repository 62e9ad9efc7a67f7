#include "skytomo/vfmc.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "skytomo/optics.hpp"

namespace skytomo {

namespace {

double radical_inverse_base2(std::uint32_t i) {
  i = (i << 16) | (i >> 16);
  i = ((i & 0x00ff00ffu) << 8) | ((i & 0xff00ff00u) >> 8);
  i = ((i & 0x0f0f0f0fu) << 4) | ((i & 0xf0f0f0f0u) >> 4);
  i = ((i & 0x33333333u) << 2) | ((i & 0xccccccccu) >> 2);
  i = ((i & 0x55555555u) << 1) | ((i & 0xaaaaaaaau) >> 1);
  return static_cast<double>(i) * 0x1.0p-32;
}

void check_size(std::size_t got, std::size_t want, const char* field) {
  if (got != want) {
    throw ValidationError(field, fmt::format("expected {} entries, got {}", want, got));
  }
}

}  // namespace

SubpixelPattern SubpixelPattern::stratified(int n_rays) {
  if (n_rays < 1) throw ValidationError("n_rays", "must be >= 1");
  std::vector<std::pair<double, double>> offsets;
  offsets.reserve(static_cast<std::size_t>(n_rays));
  for (int i = 0; i < n_rays; ++i) {
    offsets.emplace_back((i + 0.5) / n_rays, radical_inverse_base2(static_cast<std::uint32_t>(i)));
  }
  return SubpixelPattern(std::move(offsets));
}

SubpixelPattern::SubpixelPattern(std::vector<std::pair<double, double>> offsets)
    : offsets_(std::move(offsets)) {
  if (offsets_.empty()) throw ValidationError("n_rays", "must be >= 1");
  for (const auto& [su, sv] : offsets_) {
    if (!(su >= 0.0 && su <= 1.0 && sv >= 0.0 && sv <= 1.0)) {
      throw ValidationError("subpixel offset", "must lie in [0, 1]^2");
    }
  }
}

// ---------------------------------------------------------------------------

ProjectionMatrix build_projection(const Scene& scene, std::size_t camera,
                                  const SubpixelPattern& pattern) {
  if (camera >= scene.cameras.size()) throw ValidationError("camera", "index out of range");
  const Camera& cam = scene.cameras[camera];
  const VoxelGrid& grid = scene.grid;
  const double scale = 1.0 / (pattern.size() * grid.voxel_volume());

  ProjectionMatrix out;
  out.n_rays = pattern.size();
  out.ray_counts.assign(grid.size(), 0);
  out.matrix.resize(cam.num_pixels(), static_cast<Eigen::Index>(grid.size()));

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> row(grid.size(), 0.0);
  std::vector<std::size_t> touched;
  for (int p = 0; p < cam.num_pixels(); ++p) {
    if (!cam.valid(p)) continue;
    for (const auto& [su, sv] : pattern.offsets()) {
      const Vec3 d = cam.direction_at(cam.image_coords(p, su, sv));
      walk_ray(grid, cam.position(), d, std::numeric_limits<double>::infinity(),
               [&](std::size_t k, double t0, double t1) {
                 if (row[k] == 0.0) touched.push_back(k);
                 row[k] += (t1 - t0) * scale;
                 ++out.ray_counts[k];
                 return true;
               });
    }
    for (std::size_t k : touched) {
      triplets.emplace_back(p, static_cast<int>(k), row[k]);
      row[k] = 0.0;
    }
    touched.clear();
  }
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix.makeCompressed();
  return out;
}

ProjectionMatrix build_projection(const Scene& scene, std::size_t camera, int n_rays) {
  return build_projection(scene, camera, SubpixelPattern::stratified(n_rays));
}

SparseMatrix build_los_geometry(const VoxelGrid& grid, const Vec3& camera,
                                std::span<const std::size_t> rows) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  SparseMatrix w(n, n);
  std::vector<Eigen::Triplet<double>> triplets;
  auto fill_row = [&](std::size_t k) {
    const Vec3 v = grid.center(k) - camera;
    const double dist = v.norm();
    if (!(dist > 0.0)) return;
    walk_ray(grid, camera, v / dist, dist, [&](std::size_t m, double t0, double t1) {
      triplets.emplace_back(static_cast<int>(k), static_cast<int>(m), t1 - t0);
      return true;
    });
  };
  if (rows.empty()) {
    for (std::size_t k = 0; k < grid.size(); ++k) fill_row(k);
  } else {
    for (std::size_t k : rows) {
      if (k >= grid.size()) throw ValidationError("rows", "voxel index out of range");
      fill_row(k);
    }
  }
  w.setFromTriplets(triplets.begin(), triplets.end());
  w.makeCompressed();
  return w;
}

std::vector<double> los_transmittance(const SparseMatrix& los, std::span<const double> beta) {
  check_size(beta.size(), static_cast<std::size_t>(los.cols()), "beta");
  const Eigen::Map<const Eigen::VectorXd> b(beta.data(), static_cast<Eigen::Index>(beta.size()));
  const Eigen::VectorXd tau = los * b;
  std::vector<double> t(static_cast<std::size_t>(tau.size()));
  for (Eigen::Index k = 0; k < tau.size(); ++k) t[static_cast<std::size_t>(k)] = std::exp(-tau[k]);
  return t;
}

std::vector<double> los_transmittance_direct(const VoxelGrid& grid, const Vec3& camera,
                                             std::span<const double> beta) {
  check_size(beta.size(), grid.size(), "beta");
  std::vector<double> t(grid.size(), 1.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec3 v = grid.center(k) - camera;
    const double dist = v.norm();
    if (!(dist > 0.0)) continue;
    t[k] = std::exp(-optical_depth_along(grid, beta, camera, v / dist, dist));
  }
  return t;
}

LosMatrix build_los(const Scene& scene, std::size_t camera, int channel) {
  if (camera >= scene.cameras.size()) throw ValidationError("camera", "index out of range");
  LosMatrix out;
  out.matrix = build_los_geometry(scene.grid, scene.cameras[camera].position());
  out.transmittance = los_transmittance(out.matrix, scene.medium.total_field(channel));
  return out;
}

// ---------------------------------------------------------------------------

ScatterCache::ScatterCache(const Scene& scene, int channel)
    : scene_(&scene),
      channel_(channel),
      n_cameras_(scene.cameras.size()),
      n_voxels_(scene.grid.size()),
      values_(n_cameras_ * n_voxels_, 0.0),
      counts_(n_voxels_, 0) {
  camera_xyz_.reserve(3 * n_cameras_);
  for (const Camera& cam : scene.cameras) {
    for (int a = 0; a < 3; ++a) camera_xyz_.push_back(cam.position()[a]);
  }
}

void ScatterCache::on_scatter(const ScatterEvent& e) {
  const Medium& medium = scene_->medium;
  const bool aerosol = e.particle == Particle::Aerosol;
  const double g = medium.aerosol.g[channel_];
  const double weight =
      e.packet_power * e.intensity * (aerosol ? medium.aerosol.albedo : medium.albedo_air);
  double* out = values_.data() + e.voxel * n_cameras_;
  for (std::size_t c = 0; c < n_cameras_; ++c) {
    const double vx = camera_xyz_[3 * c] - e.position.x();
    const double vy = camera_xyz_[3 * c + 1] - e.position.y();
    const double vz = camera_xyz_[3 * c + 2] - e.position.z();
    const double r = std::sqrt(vx * vx + vy * vy + vz * vz);
    const double mu =
        r > 0.0 ? (e.direction.x() * vx + e.direction.y() * vy + e.direction.z() * vz) / r : 1.0;
    out[c] += weight * (aerosol ? phase_hg(mu, g) : phase_rayleigh(mu));
  }
  ++counts_[e.voxel];
}

std::unique_ptr<EventSink> ScatterCache::fork() const {
  return std::make_unique<ScatterCache>(*scene_, channel_);
}

void ScatterCache::merge(const EventSink& other) {
  const auto& o = dynamic_cast<const ScatterCache&>(other);
  if (o.values_.size() != values_.size()) throw std::logic_error("ScatterCache: shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += o.counts_[k];
}

std::vector<double> ScatterCache::view(std::size_t camera) const {
  std::vector<double> l(n_voxels_);
  for (std::size_t k = 0; k < n_voxels_; ++k) l[k] = values_[k * n_cameras_ + camera];
  return l;
}

ScatterFields accumulate_scatter(const Scene& scene, int channel, std::uint64_t n_packets,
                                 std::uint64_t seed, const TransportOptions& options) {
  ScatterCache cache(scene, channel);
  EventSink* sinks[] = {&cache};
  TransportOptions opts = options;
  opts.camera_images = false;
  FmcResult fmc = trace_fmc(scene, channel, n_packets, sinks, seed, opts);
  ScatterFields out;
  out.radiance.reserve(scene.cameras.size());
  for (std::size_t c = 0; c < scene.cameras.size(); ++c) out.radiance.push_back(cache.view(c));
  out.event_counts = cache.event_counts();
  out.stats = std::move(fmc.stats);
  return out;
}

std::vector<double> in_scatter_field(std::span<const double> radiance,
                                     std::span<const double> beta) {
  check_size(beta.size(), radiance.size(), "beta");
  std::vector<double> j(radiance.size(), 0.0);
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (beta[k] > 0.0) j[k] = radiance[k] / beta[k];
  }
  return j;
}

Image render_radiance(const ProjectionMatrix& projection, const Camera& camera,
                      std::span<const double> radiance, std::span<const double> transmittance) {
  const auto n = static_cast<std::size_t>(projection.matrix.cols());
  check_size(radiance.size(), n, "radiance");
  check_size(transmittance.size(), n, "transmittance");
  check_size(static_cast<std::size_t>(projection.matrix.rows()),
             static_cast<std::size_t>(camera.num_pixels()), "projection rows");
  Eigen::VectorXd source(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) source[static_cast<Eigen::Index>(k)] = radiance[k] * transmittance[k];
  const Eigen::VectorXd pix = projection.matrix * source;
  Image img(camera.width(), camera.height());
  for (Eigen::Index p = 0; p < pix.size(); ++p) img[static_cast<std::size_t>(p)] = pix[p];
  return img;
}

Image render(const ProjectionMatrix& projection, const Camera& camera, std::span<const double> j,
             std::span<const double> beta, std::span<const double> transmittance) {
  check_size(beta.size(), j.size(), "beta");
  std::vector<double> radiance(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) radiance[k] = j[k] * beta[k];
  return render_radiance(projection, camera, radiance, transmittance);
}

VfmcResult render_vfmc(const Scene& scene, int channel, std::uint64_t n_packets,
                       std::uint64_t seed, std::span<const ProjectionMatrix> projections,
                       const TransportOptions& options) {
  check_size(projections.size(), scene.cameras.size(), "projections");
  ScatterFields fields = accumulate_scatter(scene, channel, n_packets, seed, options);
  const std::vector<double> beta = scene.medium.total_field(channel);
  VfmcResult out;
  out.stats = std::move(fields.stats);
  for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
    const Camera& cam = scene.cameras[c];
    const std::vector<double> t = los_transmittance_direct(scene.grid, cam.position(), beta);
    out.images.push_back(render_radiance(projections[c], cam, fields.radiance[c], t));
  }
  return out;
}

double fit_scale(const Image& a, const Image& b, const PixelMask& mask) {
  return fit_scale(std::span(&a, 1), std::span(&b, 1), std::span(&mask, 1));
}

double fit_scale(std::span<const Image> a, std::span<const Image> b,
                 std::span<const PixelMask> masks) {
  check_size(b.size(), a.size(), "images");
  check_size(masks.size(), a.size(), "masks");
  double ab = 0.0;
  double bb = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    check_size(b[c].size(), a[c].size(), "image pixels");
    check_size(masks[c].size(), a[c].size(), "mask pixels");
    for (std::size_t p = 0; p < a[c].size(); ++p) {
      if (!masks[c][p]) continue;
      ab += a[c][p] * b[c][p];
      bb += b[c][p] * b[c][p];
    }
  }
  if (!(bb > 0.0)) throw ValidationError("image_b", "no unmasked nonzero pixel to fit a scale");
  return ab / bb;
}

ImageAgreement compare_images(std::span<const Image> a, std::span<const Image> b,
                              std::span<const PixelMask> masks) {
  ImageAgreement out;
  out.scale = fit_scale(a, b, masks);
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    for (std::size_t p = 0; p < a[c].size(); ++p) {
      if (!masks[c][p]) continue;
      ++out.pixels;
      sa += a[c][p];
      sb += b[c][p];
    }
  }
  const double n = static_cast<double>(out.pixels);
  const double ma = sa / n;
  const double mb = sb / n;
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    for (std::size_t p = 0; p < a[c].size(); ++p) {
      if (!masks[c][p]) continue;
      cov += (a[c][p] - ma) * (b[c][p] - mb);
      va += (a[c][p] - ma) * (a[c][p] - ma);
      vb += (b[c][p] - mb) * (b[c][p] - mb);
      const double d = a[c][p] - out.scale * b[c][p];
      diff += d * d;
      ref += a[c][p] * a[c][p];
    }
  }
  out.correlation = va > 0.0 && vb > 0.0 ? cov / std::sqrt(va * vb)
                                         : std::numeric_limits<double>::quiet_NaN();
  out.relative_rms = ref > 0.0 ? std::sqrt(diff / ref) : 0.0;
  out.rms = std::sqrt(diff / n);
  return out;
}

void write_triplets(const SparseMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << "# rows " << matrix.rows() << " cols " << matrix.cols() << " nnz " << matrix.nonZeros()
      << "\n";
  out.precision(17);
  for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

}  // namespace skytomo
