#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "skytomo/image.hpp"
#include "skytomo/inverse.hpp"
#include "skytomo/manifest.hpp"
#include "skytomo/oracle.hpp"
#include "skytomo/parallel.hpp"
#include "skytomo/presets.hpp"
#include "skytomo/rng.hpp"
#include "skytomo/scene.hpp"
#include "skytomo/sensor.hpp"
#include "skytomo/transport.hpp"
#include "skytomo/vfmc.hpp"

namespace fs = std::filesystem;
using namespace skytomo;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::array<int, 3> parse_grid(const std::string& text) {
  std::array<int, 3> n{};
  char x1 = 0;
  char x2 = 0;
  std::istringstream in(text);
  if (!(in >> n[0] >> x1 >> n[1] >> x2 >> n[2]) || x1 != 'x' || x2 != 'x' || !in.eof()) {
    throw ValidationError("grid", fmt::format("expected NXxNYxNZ, got '{}'", text));
  }
  for (int v : n) {
    if (v < 1) throw ValidationError("grid", "every dimension must be >= 1");
  }
  return n;
}

std::vector<int> parse_channels(const std::string& text) {
  if (text.empty()) throw ValidationError("channels", "no channel given");
  std::vector<int> out;
  for (char c : text) out.push_back(parse_channel(c));
  return out;
}

std::uint64_t positive_budget(double value, const char* field) {
  if (!(value >= 1.0) || !std::isfinite(value)) throw ValidationError(field, "budget must be >= 1");
  return static_cast<std::uint64_t>(std::llround(value));
}

/// Mask of geometrically valid pixels of a w x h camera.
PixelMask valid_mask(int w, int h) {
  const Camera cam(Vec3::Zero(), w, h);
  PixelMask m(static_cast<std::size_t>(w) * h, 0);
  for (int p = 0; p < w * h; ++p) m[p] = cam.valid(p) ? 1 : 0;
  return m;
}

std::vector<Image> read_channel_images(const fs::path& dir, int channel, std::size_t n_cameras,
                                       RunManifest& manifest) {
  std::vector<Image> out;
  for (std::size_t c = 0; c < n_cameras; ++c) {
    const fs::path path = dir / image_file_name(c, channel);
    out.push_back(read_pfm(path));
    manifest.add_input(path);
  }
  return out;
}

std::size_t count_cameras(const fs::path& dir, int channel) {
  std::size_t n = 0;
  while (fs::exists(dir / image_file_name(n, channel))) ++n;
  if (n == 0) {
    throw ValidationError("images", fmt::format("no {} in '{}'", image_file_name(0, channel), dir.string()));
  }
  return n;
}

void write_image(const fs::path& path, const Image& img, RunManifest& manifest) {
  write_pfm(path, img);
  manifest.add_output(path);
}

struct Common {
  fs::path out;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-o,--out", c.out, "Run directory")->required();
  cmd->add_option("--threads", c.threads, "Workers; 0 uses SKYTOMO_THREADS or all cores")
      ->check(CLI::NonNegativeNumber);
}

RunManifest start(const std::string& command, const Common& c) {
  fs::create_directories(c.out);
  RunManifest m(command);
  m.config()["threads"] = resolve_threads(c.threads);
  return m;
}

void finish(RunManifest& m, const Common& c) { m.write(c.out / "manifest.json"); }

TransportOptions transport(int threads) {
  TransportOptions o;
  o.threads = threads;
  return o;
}

// ---------------------------------------------------------------------------

struct GenSceneArgs {
  Common common;
  std::string preset;
  std::string grid = "24x24x24";
  int pixels = 32;
  bool paper_scale = false;
  std::optional<double> sun_zenith;
  std::optional<double> sun_azimuth;
  double aerosol_scale = 1.0;
  bool vacuum = false;
  bool raw = false;
};

void gen_scene(const GenSceneArgs& a) {
  const auto t0 = Clock::now();
  RunManifest m = start("gen-scene", a.common);
  const auto n = parse_grid(a.grid);
  Scene s = make_preset(a.preset, {.nx = n[0], .ny = n[1], .nz = n[2], .pixels = a.pixels,
                                   .paper_scale = a.paper_scale});
  if (a.sun_zenith) s.sun.zenith_deg = *a.sun_zenith;
  if (a.sun_azimuth) s.sun.azimuth_deg = *a.sun_azimuth;
  if (!(a.aerosol_scale >= 0.0)) throw ValidationError("aerosol_scale", "must be >= 0");
  for (double& v : s.medium.beta_aerosol_green) v *= a.aerosol_scale;
  if (a.vacuum) s.medium = Medium::empty(s.grid.size());
  s.validate();

  const fs::path path = a.common.out / "scene.json";
  save_scene(s, path, a.raw ? VolumeStorage::Raw : VolumeStorage::Inline);
  m.add_output(path);
  if (a.raw) {
    for (int c = 0; c < kNumChannels; ++c) {
      const fs::path vol = a.common.out / fmt::format("scene_beta_air_{}.f32", kChannelNames[c]);
      m.add_output(vol);
      m.add_output(vol.string() + ".json");
    }
    m.add_output(a.common.out / "scene_beta_aerosol_G.f32");
    m.add_output((a.common.out / "scene_beta_aerosol_G.f32").string() + ".json");
  }
  m.config()["preset"] = a.preset;
  m.config()["grid"] = {s.grid.nx(), s.grid.ny(), s.grid.nz()};
  m.config()["pixels"] = s.cameras.empty() ? 0 : s.cameras.front().width();
  m.config()["cameras"] = s.cameras.size();
  m.config()["sun_zenith_deg"] = s.sun.zenith_deg;
  m.config()["sun_azimuth_deg"] = s.sun.azimuth_deg;
  m.config()["aerosol_scale"] = a.aerosol_scale;
  m.config()["vacuum"] = a.vacuum;
  m.add_timing("total", seconds_since(t0));
  finish(m, a.common);
  std::printf("wrote %s (%dx%dx%d voxels, %zu cameras)\n", path.c_str(), s.grid.nx(), s.grid.ny(),
              s.grid.nz(), s.cameras.size());
}

// ---------------------------------------------------------------------------

struct RenderArgs {
  Common common;
  fs::path scene;
  std::string method = "vfmc";
  bool oracle = false;
  double photons = 1e6;
  double per_pixel = 1000;
  int n_rays = 10;
  int subsamples = 4;
  std::uint64_t seed = 1;
  std::string channels = "RGB";
  bool stats = false;
};

void render_cmd(const RenderArgs& a) {
  const auto t0 = Clock::now();
  RunManifest m = start("render", a.common);
  const Scene s = load_scene(a.scene);
  m.add_input(a.scene);
  const int threads = resolve_threads(a.common.threads);
  const std::vector<int> channels = parse_channels(a.channels);
  const fs::path& out = a.common.out;
  const std::string method = a.oracle ? "single-scatter" : a.method;
  m.config()["method"] = method;
  m.config()["channels"] = a.channels;
  m.add_seed("render", a.seed);

  auto write_stats = [&](const TransportStats& st, int ch) {
    if (!a.stats) return;
    const fs::path p = out / fmt::format("stats_{}.csv", kChannelNames[ch]);
    st.write_csv(p);
    m.add_output(p);
  };

  if (method == "single-scatter") {
    if (a.subsamples < 1) throw ValidationError("subsamples", "must be >= 1");
    m.config()["subsamples"] = a.subsamples;
    for (int ch : channels) {
      for (std::size_t c = 0; c < s.cameras.size(); ++c) {
        write_image(out / image_file_name(c, ch),
                    render_single_scatter(s, ch, c, {.subsamples = a.subsamples, .threads = threads}), m);
      }
    }
  } else if (method == "fmc") {
    const std::uint64_t photons = positive_budget(a.photons, "photons");
    m.config()["photons"] = photons;
    for (int ch : channels) {
      const FmcResult r = trace_fmc(s, ch, photons, {}, derive_seed(a.seed, ch), transport(threads));
      for (std::size_t c = 0; c < s.cameras.size(); ++c) {
        write_image(out / image_file_name(c, ch), r.images[c], m);
      }
      write_stats(r.stats, ch);
    }
  } else if (method == "vfmc") {
    const std::uint64_t photons = positive_budget(a.photons, "photons");
    if (a.n_rays < 1) throw ValidationError("nrays", "must be >= 1");
    m.config()["photons"] = photons;
    m.config()["nrays"] = a.n_rays;
    const auto tp = Clock::now();
    std::vector<ProjectionMatrix> proj(s.cameras.size());
    parallel_for(proj.size(), threads, [&](std::size_t c) { proj[c] = build_projection(s, c, a.n_rays); });
    m.add_timing("projection", seconds_since(tp));
    for (int ch : channels) {
      const VfmcResult r = render_vfmc(s, ch, photons, derive_seed(a.seed, ch), proj, transport(threads));
      for (std::size_t c = 0; c < s.cameras.size(); ++c) {
        write_image(out / image_file_name(c, ch), r.images[c], m);
      }
      write_stats(r.stats, ch);
    }
  } else if (method == "bmc") {
    const std::uint64_t per_pixel = positive_budget(a.per_pixel, "per_pixel");
    m.config()["per_pixel"] = per_pixel;
    for (int ch : channels) {
      TransportStats total;
      for (std::size_t c = 0; c < s.cameras.size(); ++c) {
        const BmcImage b = render_bmc(s, ch, c, per_pixel, derive_seed(a.seed, c * kNumChannels + ch),
                                      transport(threads));
        write_image(out / image_file_name(c, ch), b.mean, m);
        write_image(out / fmt::format("cam{}_{}_stderr.pfm", c, kChannelNames[ch]), b.std_error, m);
        total.merge(b.stats);
      }
      write_stats(total, ch);
    }
  } else {
    throw ValidationError("method", fmt::format("unknown method '{}'", a.method));
  }
  m.add_timing("total", seconds_since(t0));
  finish(m, a.common);
  std::printf("%s: %zu cameras x %zu channels in %.2fs\n", method.c_str(), s.cameras.size(),
              channels.size(), seconds_since(t0));
}

// ---------------------------------------------------------------------------

struct SenseArgs {
  Common common;
  fs::path scene;
  fs::path images;
  std::uint64_t seed = 1;
  int bits = 10;
  double read_noise = 0.4;
  bool no_noise = false;
  double sun_mask_deg = 15.0;
};

void sense_cmd(const SenseArgs& a) {
  const auto t0 = Clock::now();
  RunManifest m = start("sense", a.common);
  const Scene s = load_scene(a.scene);
  m.add_input(a.scene);
  ImageSet clean(s.cameras.size());
  for (int ch = 0; ch < kNumChannels; ++ch) {
    const auto imgs = read_channel_images(a.images, ch, s.cameras.size(), m);
    for (std::size_t c = 0; c < imgs.size(); ++c) clean[c][ch] = imgs[c];
  }
  SensorModel model;
  model.bit_depth = a.bits;
  model.read_noise = a.read_noise;
  model.noise = !a.no_noise;
  const Measurement meas = apply_sensor(clean, build_sun_masks(s, a.sun_mask_deg), model, a.seed);
  const ImageSet radiance = to_radiance(meas);
  for (std::size_t c = 0; c < s.cameras.size(); ++c) {
    for (int ch = 0; ch < kNumChannels; ++ch) {
      const fs::path png = a.common.out / image_file_name(c, ch, "png");
      write_png16(png, meas.graylevels[c][ch]);
      m.add_output(png);
      write_image(a.common.out / image_file_name(c, ch), radiance[c][ch], m);
    }
  }
  const fs::path report = a.common.out / "sensor.json";
  {
    std::ofstream f(report);
    f << nlohmann::json{{"gain", meas.gain}, {"bit_depth", a.bits}}.dump(2) << '\n';
  }
  m.add_output(report);
  m.add_seed("sensor", a.seed);
  m.config()["bit_depth"] = a.bits;
  m.config()["read_noise"] = model.noise ? a.read_noise : 0.0;
  m.config()["sun_mask_deg"] = a.sun_mask_deg;
  m.config()["gain"] = meas.gain;
  m.add_timing("total", seconds_since(t0));
  finish(m, a.common);
  std::printf("gain %.6g graylevels per unit radiance\n", meas.gain);
}

// ---------------------------------------------------------------------------

struct InvertArgs {
  Common common;
  fs::path scene;
  fs::path images;
  std::string init = "zero";
  bool truth_from_scene = false;
  std::optional<fs::path> truth_volume;
  int n_gd = 5;
  int max_q = 200;
  double photons = 1e5;
  double step = 0.0;
  double eta = 0.0;
  std::uint64_t seed = 1;
  int n_rays = 10;
  double sun_mask_deg = 15.0;
  bool single_scatter = false;
  bool no_conditioning = false;
};

std::vector<double> load_field(const fs::path& path, const VoxelGrid& grid) {
  if (fs::exists(path.string() + ".json")) {
    VolumeHeader h;
    std::vector<double> v = read_volume(path, &h);
    if (h.dims != std::array<int, 3>{grid.nx(), grid.ny(), grid.nz()}) {
      throw ValidationError("volume", fmt::format("'{}' does not match the scene grid", path.string()));
    }
    return v;
  }
  return read_raw_f32(path, grid.size());
}

void invert_cmd(const InvertArgs& a) {
  const auto t0 = Clock::now();
  RunManifest m = start("invert", a.common);
  const Scene s = load_scene(a.scene);
  m.add_input(a.scene);
  ImageSet measured(s.cameras.size());
  for (int ch = 0; ch < kNumChannels; ++ch) {
    const auto imgs = read_channel_images(a.images, ch, s.cameras.size(), m);
    for (std::size_t c = 0; c < imgs.size(); ++c) {
      if (imgs[c].width != s.cameras[c].width() || imgs[c].height != s.cameras[c].height()) {
        throw ValidationError("images", fmt::format("camera {} image size does not match the scene", c));
      }
      measured[c][ch] = imgs[c];
    }
  }
  const int threads = resolve_threads(a.common.threads);
  ProblemOptions po;
  po.n_rays = a.n_rays;
  po.eta = a.eta;
  po.conditioning = !a.no_conditioning;
  po.threads = threads;
  const InverseProblem problem = make_inverse_problem(s, measured, build_sun_masks(s, a.sun_mask_deg), po);

  std::vector<double> init(s.grid.size(), 0.0);
  if (a.init != "zero") {
    init = load_field(a.init, s.grid);
    m.add_input(a.init);
  }
  std::optional<std::vector<double>> truth;
  if (a.truth_volume) {
    truth = load_field(*a.truth_volume, s.grid);
    m.add_input(*a.truth_volume);
  } else if (a.truth_from_scene) {
    truth = s.medium.beta_aerosol_green;
  }

  SolveOptions so;
  so.step = a.step;
  so.n_gd = a.n_gd;
  so.max_q = a.max_q;
  so.photons = positive_budget(a.photons, "photons");
  so.seed = a.seed;
  so.forward = a.single_scatter ? ForwardModel::SingleScatter : ForwardModel::MultiScatter;
  so.transport.threads = threads;
  const SolveResult r = truth ? solve(problem, init, so, std::span<const double>(*truth))
                              : solve(problem, init, so);

  const fs::path& out = a.common.out;
  const fs::path volume = out / "beta_aerosol_G.f32";
  write_volume(volume, r.beta,
               {{s.grid.nx(), s.grid.ny(), s.grid.nz()}, s.grid.origin(), s.grid.voxel_dims(),
                "beta_aerosol", "G"});
  m.add_output(volume);
  m.add_output(volume.string() + ".json");
  const fs::path trace = out / "trace.csv";
  r.write_trace_csv(trace);
  m.add_output(trace);

  nlohmann::json report{{"blocks", r.blocks},
                        {"step_halvings", r.step_halvings},
                        {"plateaued", r.plateaued},
                        {"final_cost", r.trace.back().cost},
                        {"nonincreasing_fraction", r.nonincreasing_fraction()}};
  if (truth) {
    const ErrorMetrics e = error_metrics(r.beta, *truth);
    report["delta_mass"] = e.delta_mass;
    report["epsilon"] = e.epsilon;
    std::printf("delta_mass %+.4f epsilon %.4f\n", e.delta_mass, e.epsilon);
  }
  const fs::path report_path = out / "report.json";
  {
    std::ofstream f(report_path);
    f << report.dump(2) << '\n';
  }
  m.add_output(report_path);

  m.config()["init"] = a.init;
  m.config()["forward"] = a.single_scatter ? "single-scatter" : "multi-scatter";
  m.config()["conditioning"] = po.conditioning;
  m.config()["n_gd"] = a.n_gd;
  m.config()["max_q"] = a.max_q;
  m.config()["photons"] = so.photons;
  m.config()["step"] = a.step;
  m.config()["eta"] = a.eta;
  m.config()["nrays"] = a.n_rays;
  m.config()["sun_mask_deg"] = a.sun_mask_deg;
  m.add_seed("solve", a.seed);
  m.add_timing("total", seconds_since(t0));
  finish(m, a.common);
  std::printf("%d blocks, %d step halvings, final cost %.6g\n", r.blocks, r.step_halvings,
              r.trace.back().cost);
}

// ---------------------------------------------------------------------------

struct CompareArgs {
  Common common;
  fs::path a;
  fs::path b;
  std::optional<fs::path> scene;
  double sun_mask_deg = 15.0;
  std::string channels = "RGB";
};

nlohmann::json agreement_json(const ImageAgreement& g) {
  return {{"scale", g.scale},
          {"correlation", g.correlation},
          {"relative_rms", g.relative_rms},
          {"rms", g.rms},
          {"pixels", g.pixels}};
}

void compare_cmd(const CompareArgs& args) {
  const auto t0 = Clock::now();
  RunManifest m = start("compare", args.common);
  const std::vector<int> channels = parse_channels(args.channels);
  std::optional<Scene> scene;
  if (args.scene) {
    scene = load_scene(*args.scene);
    m.add_input(*args.scene);
  }
  const std::size_t n_cam = scene ? scene->cameras.size() : count_cameras(args.a, channels.front());

  std::vector<Image> all_a;
  std::vector<Image> all_b;
  std::vector<PixelMask> all_masks;
  nlohmann::json report;
  const fs::path profile_path = args.common.out / "profiles.csv";
  std::ofstream profile(profile_path);
  profile << "camera,channel,column,a,b,b_scaled\n";
  profile.precision(10);
  for (int ch : channels) {
    const auto a = read_channel_images(args.a, ch, n_cam, m);
    const auto b = read_channel_images(args.b, ch, n_cam, m);
    std::vector<PixelMask> masks;
    for (std::size_t c = 0; c < n_cam; ++c) {
      if (a[c].width != b[c].width || a[c].height != b[c].height) {
        throw ValidationError("images", fmt::format("camera {} channel {}: dimension mismatch", c,
                                                    kChannelNames[ch]));
      }
      masks.push_back(scene ? build_sun_mask(scene->cameras[c], scene->sun, args.sun_mask_deg)
                            : valid_mask(a[c].width, a[c].height));
      if (masks.back().size() != a[c].size()) {
        throw ValidationError("images", fmt::format("camera {}: image does not match the scene", c));
      }
    }
    const ImageAgreement g = compare_images(a, b, masks);
    report["channels"][std::string(1, kChannelNames[ch])] = agreement_json(g);
    for (std::size_t c = 0; c < n_cam; ++c) {
      const int row = a[c].height / 2;
      for (int i = 0; i < a[c].width; ++i) {
        const std::size_t p = static_cast<std::size_t>(row) * a[c].width + i;
        profile << c << ',' << kChannelNames[ch] << ',' << i << ',' << a[c][p] << ',' << b[c][p] << ','
                << g.scale * b[c][p] << '\n';
      }
      all_a.push_back(a[c]);
      all_b.push_back(b[c]);
      all_masks.push_back(masks[c]);
    }
  }
  profile.close();
  m.add_output(profile_path);
  const ImageAgreement all = compare_images(all_a, all_b, all_masks);
  report["all"] = agreement_json(all);
  const fs::path report_path = args.common.out / "report.json";
  {
    std::ofstream f(report_path);
    f << report.dump(2) << '\n';
  }
  m.add_output(report_path);
  m.config()["channels"] = args.channels;
  m.config()["sun_mask_deg"] = args.sun_mask_deg;
  m.add_timing("total", seconds_since(t0));
  finish(m, args.common);
  std::printf("scale %.6g correlation %.6f relative_rms %.6f rms %.6g\n", all.scale, all.correlation,
              all.relative_rms, all.rms);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view scattering tomography: scenes, rendering, sensing, inversion"};
  app.require_subcommand(1);

  GenSceneArgs gen;
  auto* g = app.add_subcommand("gen-scene", "Write a preset scene");
  add_common(g, gen.common);
  g->add_option("--preset", gen.preset, "atm1|atm2|atm3|atm4|toy-conditioning|toy-recovery")->required();
  g->add_option("--grid", gen.grid, "Voxel grid NXxNYxNZ; toy-recovery is fixed at 12x12x12");
  g->add_option("--pixels", gen.pixels, "Camera image side");
  g->add_flag("--paper-scale", gen.paper_scale, "80x80x120 grid with 64x64 cameras");
  g->add_option("--sun-zenith", gen.sun_zenith, "Sun zenith angle, degrees");
  g->add_option("--sun-azimuth", gen.sun_azimuth, "Sun azimuth, degrees");
  g->add_option("--aerosol-scale", gen.aerosol_scale, "Multiplies the aerosol extinction");
  g->add_flag("--vacuum", gen.vacuum, "Remove air and aerosol");
  g->add_flag("--raw", gen.raw, "Store volumes as raw float32 files next to the scene");

  RenderArgs ren;
  auto* r = app.add_subcommand("render", "Render camera images");
  add_common(r, ren.common);
  r->add_option("--scene", ren.scene, "Scene file")->required()->check(CLI::ExistingFile);
  r->add_option("--method", ren.method, "fmc|bmc|vfmc");
  r->add_flag("--single-scatter-oracle", ren.oracle, "Closed-form single-scatter image");
  r->add_option("--photons", ren.photons, "Packets per channel (fmc, vfmc)");
  r->add_option("--per-pixel", ren.per_pixel, "Packets per pixel (bmc)");
  r->add_option("--nrays", ren.n_rays, "Sub-pixel rays of the projection matrix (vfmc)");
  r->add_option("--subsamples", ren.subsamples, "Sub-pixel samples per axis (oracle)");
  r->add_option("--seed", ren.seed, "Base seed");
  r->add_option("--channels", ren.channels, "Subset of RGB");
  r->add_flag("--stats", ren.stats, "Write transport statistics CSV per channel");

  SenseArgs sen;
  auto* se = app.add_subcommand("sense", "Apply the sensor model to rendered radiance");
  add_common(se, sen.common);
  se->add_option("--scene", sen.scene, "Scene file")->required()->check(CLI::ExistingFile);
  se->add_option("--images", sen.images, "Directory of radiance images")->required()->check(CLI::ExistingDirectory);
  se->add_option("--seed", sen.seed, "Noise seed");
  se->add_option("--bits", sen.bits, "Bit depth");
  se->add_option("--read-noise", sen.read_noise, "Read noise, graylevels");
  se->add_flag("--no-noise", sen.no_noise, "Quantize without noise");
  se->add_option("--sun-mask-deg", sen.sun_mask_deg, "Sun mask radius, degrees");

  InvertArgs inv;
  auto* in = app.add_subcommand("invert", "Recover the aerosol extinction field");
  add_common(in, inv.common);
  in->add_option("--scene", inv.scene, "Scene with the camera geometry, air and aerosol optics")
      ->required()->check(CLI::ExistingFile);
  in->add_option("--images", inv.images, "Directory of measured radiance images")
      ->required()->check(CLI::ExistingDirectory);
  in->add_option("--init", inv.init, "zero or a float32 volume");
  in->add_flag("--truth", inv.truth_from_scene, "Score against the scene's aerosol field");
  in->add_option("--truth-volume", inv.truth_volume, "Score against this volume");
  in->add_option("--n-gd", inv.n_gd, "Descent steps per surrogate block");
  in->add_option("--max-q", inv.max_q, "Maximum surrogate blocks");
  in->add_option("--photons", inv.photons, "Packets per block and channel");
  in->add_option("--step", inv.step, "Step size; 0 estimates it");
  in->add_option("--eta", inv.eta, "Regularization weight");
  in->add_option("--seed", inv.seed, "Base seed");
  in->add_option("--nrays", inv.n_rays, "Sub-pixel rays of the projection matrices");
  in->add_option("--sun-mask-deg", inv.sun_mask_deg, "Sun mask radius, degrees");
  in->add_flag("--single-scatter", inv.single_scatter, "Closed-form single-scatter forward model");
  in->add_flag("--no-conditioning", inv.no_conditioning, "Disable ray-count conditioning");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Scale-fitted comparison of two image sets");
  add_common(c, cmp.common);
  c->add_option("--a", cmp.a, "Reference image directory")->required()->check(CLI::ExistingDirectory);
  c->add_option("--b", cmp.b, "Image directory fitted to the reference")->required()->check(CLI::ExistingDirectory);
  c->add_option("--scene", cmp.scene, "Scene for sun masks; without it every valid pixel is used");
  c->add_option("--sun-mask-deg", cmp.sun_mask_deg, "Sun mask radius, degrees");
  c->add_option("--channels", cmp.channels, "Subset of RGB");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    if (*g) gen_scene(gen);
    if (*r) render_cmd(ren);
    if (*se) sense_cmd(sen);
    if (*in) invert_cmd(inv);
    if (*c) compare_cmd(cmp);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
