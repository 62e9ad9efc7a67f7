#include "skytomo/transport.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "skytomo/optics.hpp"
#include "skytomo/parallel.hpp"
#include "skytomo/rng.hpp"

namespace skytomo {

namespace {

constexpr std::uint64_t kChunkPackets = 4096;

double phase_of(Particle particle, double mu, double g) {
  return particle == Particle::Aerosol ? phase_hg(mu, g) : phase_rayleigh(mu);
}

double albedo_of(Particle particle, const Medium& medium) {
  return particle == Particle::Aerosol ? medium.aerosol.albedo : medium.albedo_air;
}

Vec3 scatter(Particle particle, const Vec3& dir, double g, Rng& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  return particle == Particle::Aerosol ? sample_hg_direction(dir, g, u1, u2).direction
                                       : sample_rayleigh_direction(dir, u1, u2).direction;
}

double detector_radius(const Scene& scene, const TransportOptions& options) {
  if (options.detector_radius >= 0.0) return options.detector_radius;
  return 0.5 * scene.grid.voxel_dims().minCoeff();
}

}  // namespace

// ---------------------------------------------------------------------------
// Statistics

void TransportStats::record_event(int order) {
  ++events;
  if (order_histogram.size() <= static_cast<std::size_t>(order)) order_histogram.resize(order + 1, 0);
  ++order_histogram[order];
}

void TransportStats::merge(const TransportStats& other) {
  packets += other.packets;
  events += other.events;
  escaped += other.escaped;
  roulette_terminated += other.roulette_terminated;
  absorbed += other.absorbed;
  order_cap_truncated += other.order_cap_truncated;
  detector_hits += other.detector_hits;
  if (order_histogram.size() < other.order_histogram.size()) {
    order_histogram.resize(other.order_histogram.size(), 0);
  }
  for (std::size_t s = 0; s < other.order_histogram.size(); ++s) {
    order_histogram[s] += other.order_histogram[s];
  }
}

void TransportStats::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << "kind,key,count\n";
  out << "total,packets," << packets << "\n";
  out << "total,events," << events << "\n";
  out << "termination,escaped," << escaped << "\n";
  out << "termination,roulette," << roulette_terminated << "\n";
  out << "termination,absorbed," << absorbed << "\n";
  out << "termination,order_cap," << order_cap_truncated << "\n";
  out << "detector,hits," << detector_hits << "\n";
  for (std::size_t s = 1; s < order_histogram.size(); ++s) {
    out << "order," << s << ',' << order_histogram[s] << "\n";
  }
}

// ---------------------------------------------------------------------------
// Event kernels

Particle choose_particle(const Medium& medium, std::size_t k, int channel, double u) {
  const double aer = medium.beta_aerosol(channel, k);
  const double total = medium.beta_air[channel][k] + aer;
  if (!(total > 0.0)) {
    throw std::logic_error(fmt::format("choose_particle: voxel {} has zero extinction", k));
  }
  return u * total < aer ? Particle::Aerosol : Particle::Air;
}

void attenuate_and_roulette(PhotonPacket& packet, Particle particle, const Medium& medium,
                            double u, const RouletteParams& roulette) {
  packet.intensity *= albedo_of(particle, medium);
  if (packet.intensity <= 0.0) {
    packet.alive = false;
    return;
  }
  if (roulette.enabled && packet.intensity < roulette.threshold) {
    if (u < roulette.survival) {
      packet.intensity /= roulette.survival;
    } else {
      packet.alive = false;
    }
  }
}

// ---------------------------------------------------------------------------
// Plain FMC local estimation

FmcLocalEstimator::FmcLocalEstimator(const Scene& scene, int channel, std::span<const double> beta)
    : scene_(&scene), channel_(channel), beta_(beta) {
  images_.reserve(scene.cameras.size());
  for (const Camera& cam : scene.cameras) images_.emplace_back(cam.width(), cam.height());
}

void FmcLocalEstimator::on_scatter(const ScatterEvent& e) {
  const Medium& medium = scene_->medium;
  const double g = medium.aerosol.g[channel_];
  const double w = e.packet_power * e.intensity * albedo_of(e.particle, medium);
  for (std::size_t c = 0; c < scene_->cameras.size(); ++c) {
    const Camera& cam = scene_->cameras[c];
    const Vec3 v = cam.position() - e.position;
    const double r = v.norm();
    if (!(r > 0.0)) continue;
    const Vec3 to_cam = v / r;
    const auto pixel = cam.pixel_of(-to_cam);
    if (!pixel) continue;
    const double tau = optical_depth_along(scene_->grid, beta_, e.position, to_cam, r);
    const double p = phase_of(e.particle, e.direction.dot(to_cam), g);
    const double jac = Camera::jacobian(cam.project(-to_cam));
    images_[c][*pixel] += w * p * std::exp(-tau) / (r * r * cam.pixel_area() * jac);
  }
}

void FmcLocalEstimator::on_segment(const Vec3& a, const Vec3& b, const Vec3& direction,
                                   double weight, double radius) {
  if (!(radius > 0.0)) return;
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  for (std::size_t c = 0; c < scene_->cameras.size(); ++c) {
    const Camera& cam = scene_->cameras[c];
    const double t = len2 > 0.0 ? std::clamp((cam.position() - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double dist = (a + t * ab - cam.position()).norm();
    if (dist >= radius) continue;
    const auto pixel = cam.pixel_of(-direction);
    if (!pixel) continue;
    const double jac = Camera::jacobian(cam.project(-direction));
    images_[c][*pixel] += weight / (kPi * radius * radius * cam.pixel_area() * jac);
    ++detector_hits_;
  }
}

std::unique_ptr<EventSink> FmcLocalEstimator::fork() const {
  return std::make_unique<FmcLocalEstimator>(*scene_, channel_, beta_);
}

void FmcLocalEstimator::merge(const EventSink& other) {
  const auto& o = dynamic_cast<const FmcLocalEstimator&>(other);
  for (std::size_t c = 0; c < images_.size(); ++c) {
    for (std::size_t p = 0; p < images_[c].size(); ++p) images_[c][p] += o.images_[c][p];
  }
  detector_hits_ += o.detector_hits_;
}

// ---------------------------------------------------------------------------
// Forward tracer

FmcResult trace_fmc(const Scene& scene, int channel, std::uint64_t n_packets,
                    std::span<EventSink* const> sinks, std::uint64_t seed,
                    const TransportOptions& options) {
  if (n_packets < 1) throw ValidationError("n_packets", "photon budget must be >= 1");
  const VoxelGrid& grid = scene.grid;
  const Medium& medium = scene.medium;
  const std::vector<double> beta = medium.total_field(channel);
  const double g = medium.aerosol.g[channel];
  const Vec3 sun_dir = scene.sun.direction();

  // Launch rectangle on the TOA plane covering every point's sunward back-projection.
  const Vec3 lo = grid.origin();
  const Vec3 hi = grid.upper();
  const double height = hi.z() - lo.z();
  const double ox = -sun_dir.x() * height / -sun_dir.z();
  const double oy = -sun_dir.y() * height / -sun_dir.z();
  const double x0 = lo.x() + std::min(0.0, ox);
  const double y0 = lo.y() + std::min(0.0, oy);
  const double wx = hi.x() - lo.x() + std::abs(ox);
  const double wy = hi.y() - lo.y() + std::abs(oy);
  const double packet_power =
      scene.sun.irradiance(channel) * -sun_dir.z() * wx * wy / static_cast<double>(n_packets);
  const double det_radius = detector_radius(scene, options);

  const int workers = resolve_threads(options.threads);
  const std::uint64_t n_chunks = (n_packets + kChunkPackets - 1) / kChunkPackets;

  FmcLocalEstimator estimator(scene, channel, beta);
  std::vector<EventSink*> all_sinks(sinks.begin(), sinks.end());
  if (options.camera_images) all_sinks.push_back(&estimator);

  std::vector<std::vector<std::unique_ptr<EventSink>>> forks(static_cast<std::size_t>(workers));
  std::vector<TransportStats> worker_stats(static_cast<std::size_t>(workers));
  for (auto& f : forks) {
    for (EventSink* s : all_sinks) f.push_back(s->fork());
  }

  run_workers(workers, [&](int w) {
    auto& my_sinks = forks[static_cast<std::size_t>(w)];
    auto* my_estimator = options.camera_images
                             ? static_cast<FmcLocalEstimator*>(my_sinks.back().get())
                             : nullptr;
    TransportStats& stats = worker_stats[static_cast<std::size_t>(w)];
    for (std::uint64_t chunk = static_cast<std::uint64_t>(w); chunk < n_chunks;
         chunk += static_cast<std::uint64_t>(workers)) {
      Rng rng(seed, chunk);
      const std::uint64_t begin = chunk * kChunkPackets;
      const std::uint64_t end = std::min(n_packets, begin + kChunkPackets);
      for (std::uint64_t i = begin; i < end; ++i) {
        ++stats.packets;
        PhotonPacket pk;
        pk.origin = Vec3(x0 + rng.uniform() * wx, y0 + rng.uniform() * wy, hi.z());
        pk.direction = sun_dir;
        while (pk.alive) {
          const double tau = sample_tau(rng.uniform());
          const MarchResult m = march_to_tau(grid, beta, pk.origin, pk.direction, tau);
          if (my_estimator && pk.order == 0) {
            my_estimator->on_segment(pk.origin, m.position, pk.direction,
                                     packet_power * pk.intensity, det_radius);
          }
          if (m.escaped) {
            ++stats.escaped;
            break;
          }
          if (pk.order >= options.max_order) {
            ++stats.order_cap_truncated;
            break;
          }
          const Particle particle = choose_particle(medium, m.voxel, channel, rng.uniform());
          const ScatterEvent event{m.voxel,     m.position,    pk.direction, particle,
                                   pk.intensity, pk.order + 1, packet_power};
          for (auto& s : my_sinks) s->on_scatter(event);
          stats.record_event(pk.order + 1);

          attenuate_and_roulette(pk, particle, medium, rng.uniform(), options.roulette);
          if (!pk.alive) {
            if (pk.intensity <= 0.0) {
              ++stats.absorbed;
            } else {
              ++stats.roulette_terminated;
            }
            break;
          }
          pk.direction = scatter(particle, pk.direction, g, rng);
          pk.origin = m.position;
          ++pk.order;
        }
      }
    }
  });

  FmcResult result;
  for (std::size_t w = 0; w < forks.size(); ++w) {
    for (std::size_t s = 0; s < all_sinks.size(); ++s) all_sinks[s]->merge(*forks[w][s]);
    result.stats.merge(worker_stats[w]);
  }
  if (options.camera_images) {
    result.images = estimator.images();
    result.stats.detector_hits = estimator.detector_hits();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Backward tracer

PixelEstimate trace_bmc(const Scene& scene, int channel, std::size_t camera, int pixel,
                        std::uint64_t n_packets, std::uint64_t seed,
                        const TransportOptions& options, TransportStats* stats_out) {
  if (n_packets < 1) throw ValidationError("n_packets", "photon budget must be >= 1");
  if (camera >= scene.cameras.size()) throw ValidationError("camera", "camera index out of range");
  const Camera& cam = scene.cameras[camera];
  if (pixel < 0 || pixel >= cam.num_pixels() || !cam.valid(pixel)) {
    throw ValidationError("pixel", fmt::format("pixel {} is not a valid pixel", pixel));
  }
  const VoxelGrid& grid = scene.grid;
  const Medium& medium = scene.medium;
  const std::vector<double> beta = medium.total_field(channel);
  const double g = medium.aerosol.g[channel];
  const Vec3 sun_dir = scene.sun.direction();
  const Vec3 to_sun = -sun_dir;
  const double irradiance = scene.sun.irradiance(channel);
  const double cos_solar = std::cos(options.solar_radius_deg * kPi / 180.0);
  const double solar_solid_angle = 2.0 * kPi * (1.0 - cos_solar);

  TransportStats stats;
  double sum = 0.0;
  double sum_sq = 0.0;
  Rng rng(seed, 0);
  for (std::uint64_t i = 0; i < n_packets; ++i) {
    ++stats.packets;
    const double su = rng.uniform();
    const double sv = rng.uniform();
    PhotonPacket pk;
    pk.origin = cam.position();
    pk.direction = cam.direction_at(cam.image_coords(pixel, su, sv));
    double value = 0.0;
    while (pk.alive) {
      const double tau = sample_tau(rng.uniform());
      const MarchResult m = march_to_tau(grid, beta, pk.origin, pk.direction, tau);
      if (m.escaped) {
        ++stats.escaped;
        if (pk.order == 0 && solar_solid_angle > 0.0 && pk.direction.dot(to_sun) > cos_solar) {
          value += irradiance * pk.intensity / solar_solid_angle;
        }
        break;
      }
      if (pk.order >= options.max_order) {
        ++stats.order_cap_truncated;
        break;
      }
      const Particle particle = choose_particle(medium, m.voxel, channel, rng.uniform());
      stats.record_event(pk.order + 1);
      const double t_sun = std::exp(-optical_depth_along(grid, beta, m.position, to_sun));
      const double p = phase_of(particle, -sun_dir.dot(pk.direction), g);
      value += irradiance * albedo_of(particle, medium) * pk.intensity * p * t_sun;

      attenuate_and_roulette(pk, particle, medium, rng.uniform(), options.roulette);
      if (!pk.alive) {
        if (pk.intensity <= 0.0) {
          ++stats.absorbed;
        } else {
          ++stats.roulette_terminated;
        }
        break;
      }
      pk.direction = scatter(particle, pk.direction, g, rng);
      pk.origin = m.position;
      ++pk.order;
    }
    sum += value;
    sum_sq += value * value;
  }
  const double n = static_cast<double>(n_packets);
  PixelEstimate est;
  est.mean = sum / n;
  if (n_packets > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
    est.std_error = std::sqrt(var / n);
  }
  if (stats_out) stats_out->merge(stats);
  return est;
}

BmcImage render_bmc(const Scene& scene, int channel, std::size_t camera,
                    std::uint64_t packets_per_pixel, std::uint64_t seed,
                    const TransportOptions& options) {
  if (camera >= scene.cameras.size()) throw ValidationError("camera", "camera index out of range");
  const Camera& cam = scene.cameras[camera];
  BmcImage out{Image(cam.width(), cam.height()), Image(cam.width(), cam.height()), {}};
  const int workers = resolve_threads(options.threads);
  std::vector<TransportStats> worker_stats(static_cast<std::size_t>(workers));
  const std::uint64_t cam_seed = derive_seed(seed, camera);
  run_workers(workers, [&](int w) {
    for (int p = w; p < cam.num_pixels(); p += workers) {
      if (!cam.valid(p)) continue;
      const PixelEstimate e = trace_bmc(scene, channel, camera, p, packets_per_pixel,
                                        derive_seed(cam_seed, static_cast<std::uint64_t>(p)),
                                        options, &worker_stats[static_cast<std::size_t>(w)]);
      out.mean[p] = e.mean;
      out.std_error[p] = e.std_error;
    }
  });
  for (const auto& s : worker_stats) out.stats.merge(s);
  return out;
}

}  // namespace skytomo
