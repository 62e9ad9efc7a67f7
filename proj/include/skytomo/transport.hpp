#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "skytomo/common.hpp"
#include "skytomo/image.hpp"
#include "skytomo/scene.hpp"

namespace skytomo {

enum class Particle : std::uint8_t { Air, Aerosol };

/// A traced packet. `order` counts the scattering events already undergone.
struct PhotonPacket {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double intensity = 1.0;
  int order = 0;
  bool alive = true;
};

/// One scattering event, reported after the particle type is chosen and before
/// the packet is attenuated or redirected. `intensity` is the pre-event I_s.
struct ScatterEvent {
  std::size_t voxel = 0;
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // incoming ray direction
  Particle particle = Particle::Air;
  double intensity = 1.0;
  int order = 0;
  double packet_power = 1.0;  // radiant power of a unit-intensity packet
};

/// Receives scattering events from the forward tracer.
///
/// Each worker thread gets its own fork(); the tracer merges forks back into
/// the original in worker order, so implementations never see concurrent calls
/// on one instance.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_scatter(const ScatterEvent& event) = 0;
  virtual std::unique_ptr<EventSink> fork() const = 0;
  virtual void merge(const EventSink& other) = 0;
};

struct RouletteParams {
  double threshold = 1e-3;  // relative to I_0 = 1
  double survival = 0.5;
  bool enabled = true;
};

struct TransportOptions {
  RouletteParams roulette;
  int max_order = 300;
  int threads = 0;  // 0: SKYTOMO_THREADS or hardware concurrency
  /// Plain-FMC direct-hit detector radius; negative means half the smallest voxel edge.
  double detector_radius = -1.0;
  double solar_radius_deg = 0.27;
  /// Plain-FMC local-estimation camera images (costly; off for scatter caching).
  bool camera_images = true;
};

struct TransportStats {
  std::uint64_t packets = 0;
  std::uint64_t events = 0;
  std::uint64_t escaped = 0;
  std::uint64_t roulette_terminated = 0;
  std::uint64_t absorbed = 0;
  std::uint64_t order_cap_truncated = 0;
  std::uint64_t detector_hits = 0;
  /// order_histogram[s] = number of events of scattering order s (s >= 1).
  std::vector<std::uint64_t> order_histogram;

  void record_event(int order);
  void merge(const TransportStats& other);
  void write_csv(const std::filesystem::path& path) const;
};

/// Draws the interacting particle: aerosol with probability beta_aerosol / beta.
Particle choose_particle(const Medium& medium, std::size_t k, int channel, double u);

/// Aerosol events scale intensity by the aerosol albedo, air events by the air
/// albedo; below the roulette threshold the packet survives with probability
/// `survival` and is reweighted by 1 / survival.
void attenuate_and_roulette(PhotonPacket& packet, Particle particle, const Medium& medium,
                            double u, const RouletteParams& roulette);

/// Plain forward local estimation onto camera images (1/r^2 estimator).
class FmcLocalEstimator final : public EventSink {
 public:
  FmcLocalEstimator(const Scene& scene, int channel, std::span<const double> beta);

  void on_scatter(const ScatterEvent& e) override;
  std::unique_ptr<EventSink> fork() const override;
  void merge(const EventSink& other) override;

  /// Step-iii detector: packet segment [a, b] passing within `radius` of a camera.
  void on_segment(const Vec3& a, const Vec3& b, const Vec3& direction, double weight,
                  double radius);

  const std::vector<Image>& images() const { return images_; }
  std::uint64_t detector_hits() const { return detector_hits_; }

 private:
  const Scene* scene_;
  int channel_;
  std::span<const double> beta_;
  std::vector<Image> images_;
  std::uint64_t detector_hits_ = 0;
};

struct FmcResult {
  std::vector<Image> images;  // empty unless options.camera_images
  TransportStats stats;
};

/// Forward Monte Carlo from the top of the atmosphere.
///
/// Packets start uniformly over the TOA plane, extended by the horizontal sun
/// shadow offset, and travel along the sun direction. Every scattering event is
/// sent to `sinks` (and to the plain-FMC estimator when camera_images is set).
/// Deterministic for a fixed (seed, thread count).
FmcResult trace_fmc(const Scene& scene, int channel, std::uint64_t n_packets,
                    std::span<EventSink* const> sinks, std::uint64_t seed,
                    const TransportOptions& options = {});

struct PixelEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Backward Monte Carlo radiance of one pixel. Packets start at the camera along
/// directions drawn uniformly over the pixel square; each event adds the sun
/// local estimate, and an unscattered packet escaping inside the solar disc adds
/// the direct term.
PixelEstimate trace_bmc(const Scene& scene, int channel, std::size_t camera, int pixel,
                        std::uint64_t n_packets, std::uint64_t seed,
                        const TransportOptions& options = {}, TransportStats* stats = nullptr);

struct BmcImage {
  Image mean;
  Image std_error;
  TransportStats stats;
};

/// BMC over every valid pixel of one camera, pixels distributed over workers.
BmcImage render_bmc(const Scene& scene, int channel, std::size_t camera,
                    std::uint64_t packets_per_pixel, std::uint64_t seed,
                    const TransportOptions& options = {});

}  // namespace skytomo
