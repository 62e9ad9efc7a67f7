#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "skytomo/scene.hpp"

namespace skytomo {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(fmt::format("{}: missing key '{}'", where, key));
  }
  return obj.at(key);
}

template <typename T>
T get_as(const json& value, const std::string& where) {
  try {
    return value.get<T>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}: {}", where, e.what()));
  }
}

Vec3 get_vec3(const json& value, const std::string& where) {
  const auto a = get_as<std::array<double, 3>>(value, where);
  return {a[0], a[1], a[2]};
}

json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

std::vector<double> load_field(const json& spec, const VoxelGrid& grid, const fs::path& base,
                               const std::string& where) {
  if (spec.is_number()) return std::vector<double>(grid.size(), spec.get<double>());
  if (spec.is_array()) return get_as<std::vector<double>>(spec, where);
  if (spec.contains("uniform")) {
    return std::vector<double>(grid.size(), get_as<double>(spec.at("uniform"), where + ".uniform"));
  }
  if (spec.contains("values")) return get_as<std::vector<double>>(spec.at("values"), where + ".values");
  if (spec.contains("raw")) {
    const fs::path p = base / get_as<std::string>(spec.at("raw"), where + ".raw");
    return read_raw_f32(p, grid.size());
  }
  throw ParseError(where + ": expected a number, array, or one of uniform/values/raw");
}

std::array<std::vector<double>, kNumChannels> load_air(const json& spec, const VoxelGrid& grid,
                                                       const fs::path& base) {
  const std::string where = "beta_air";
  if (spec.contains("profile")) {
    const json& prof = spec.at("profile");
    AirProfile p;
    if (prof.contains("sea_level")) {
      p.sea_level = get_as<std::array<double, 3>>(prof.at("sea_level"), where + ".profile.sea_level");
    }
    if (prof.contains("scale_height")) {
      p.scale_height = get_as<double>(prof.at("scale_height"), where + ".profile.scale_height");
    }
    return make_air(grid, p);
  }
  if (spec.contains("channels")) {
    const json& ch = spec.at("channels");
    if (!ch.is_array() || ch.size() != kNumChannels) {
      throw ParseError(where + ".channels: expected three per-channel entries");
    }
    std::array<std::vector<double>, kNumChannels> out;
    for (int c = 0; c < kNumChannels; ++c) {
      out[c] = load_field(ch[c], grid, base, fmt::format("{}.channels[{}]", where, c));
    }
    return out;
  }
  throw ParseError(where + ": expected 'profile' or 'channels'");
}

BlobParams parse_blobs(const json& spec) {
  BlobParams p;
  if (spec.contains("scale_height")) p.scale_height = get_as<double>(spec.at("scale_height"), "beta_aerosol.scale_height");
  const json& blobs = require(spec, "blobs", "beta_aerosol");
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    const std::string where = fmt::format("beta_aerosol.blobs[{}]", i);
    Blob b;
    b.center = get_vec3(require(blobs[i], "center", where), where + ".center");
    b.radius = get_vec3(require(blobs[i], "radius", where), where + ".radius");
    if (blobs[i].contains("amplitude")) b.amplitude = get_as<double>(blobs[i].at("amplitude"), where + ".amplitude");
    p.blobs.push_back(b);
  }
  return p;
}

CylinderParams parse_cylinder(const json& spec) {
  CylinderParams p;
  const auto opt = [&](const char* key, double& dst) {
    if (spec.contains(key)) dst = get_as<double>(spec.at(key), std::string("beta_aerosol.") + key);
  };
  opt("center_x", p.center_x);
  opt("center_y", p.center_y);
  opt("semi_axis_a", p.semi_axis_a);
  opt("semi_axis_b", p.semi_axis_b);
  opt("angle_deg", p.angle_deg);
  opt("edge_width", p.edge_width);
  opt("scale_height", p.scale_height);
  return p;
}

std::vector<double> load_aerosol(const json& spec, const VoxelGrid& grid,
                                 const AerosolOptics& optics, const fs::path& base) {
  if (spec.is_object() && spec.contains("generator")) {
    const auto gen = get_as<std::string>(spec.at("generator"), "beta_aerosol.generator");
    const double n = get_as<double>(require(spec, "n_sealevel", "beta_aerosol"), "beta_aerosol.n_sealevel");
    std::vector<double> density;
    if (gen == "haze_blobs") {
      density = haze_blobs_density(grid, n, parse_blobs(spec));
    } else if (gen == "haze_front") {
      density = haze_front_density(grid, n, parse_cylinder(spec));
    } else {
      throw ParseError("beta_aerosol.generator: unknown generator '" + gen + "'");
    }
    for (double& d : density) d *= optics.sigma[1];
    return density;
  }
  return load_field(spec, grid, base, "beta_aerosol");
}

}  // namespace

Scene load_scene(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open scene file '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
  const fs::path base = path.parent_path();

  const json& g = require(doc, "grid", "scene");
  const auto shape = get_as<std::array<int, 3>>(require(g, "shape", "grid"), "grid.shape");
  const Vec3 origin = g.contains("origin") ? get_vec3(g.at("origin"), "grid.origin") : Vec3::Zero();
  const Vec3 size = get_vec3(require(g, "voxel_size", "grid"), "grid.voxel_size");
  VoxelGrid grid(shape[0], shape[1], shape[2], origin, size);

  AerosolOptics optics;
  if (doc.contains("aerosol")) {
    const json& a = doc.at("aerosol");
    if (a.contains("sigma_um2")) {
      auto s = get_as<std::array<double, 3>>(a.at("sigma_um2"), "aerosol.sigma_um2");
      for (int c = 0; c < kNumChannels; ++c) optics.sigma[c] = s[c] * 1e-12;
    }
    if (a.contains("albedo")) optics.albedo = get_as<double>(a.at("albedo"), "aerosol.albedo");
    if (a.contains("g")) optics.g = get_as<std::array<double, 3>>(a.at("g"), "aerosol.g");
  }

  Medium medium = Medium::empty(grid.size());
  medium.aerosol = optics;
  if (doc.contains("albedo_air")) medium.albedo_air = get_as<double>(doc.at("albedo_air"), "albedo_air");
  if (doc.contains("beta_air")) medium.beta_air = load_air(doc.at("beta_air"), grid, base);
  if (doc.contains("beta_aerosol")) {
    medium.beta_aerosol_green = load_aerosol(doc.at("beta_aerosol"), grid, optics, base);
  }

  Sun sun;
  if (doc.contains("sun")) {
    const json& s = doc.at("sun");
    if (s.contains("zenith_deg")) sun.zenith_deg = get_as<double>(s.at("zenith_deg"), "sun.zenith_deg");
    if (s.contains("azimuth_deg")) sun.azimuth_deg = get_as<double>(s.at("azimuth_deg"), "sun.azimuth_deg");
    if (s.contains("irradiance_ratio")) {
      sun.irradiance_ratio = get_as<std::array<double, 3>>(s.at("irradiance_ratio"), "sun.irradiance_ratio");
    }
  }

  std::vector<Camera> cameras;
  if (doc.contains("cameras")) {
    const json& cams = doc.at("cameras");
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const std::string where = fmt::format("cameras[{}]", i);
      const Vec3 pos = get_vec3(require(cams[i], "position", where), where + ".position");
      const auto px = get_as<std::array<int, 2>>(require(cams[i], "pixels", where), where + ".pixels");
      cameras.emplace_back(pos, px[0], px[1]);
    }
  }

  Scene scene{std::move(grid), std::move(medium), std::move(cameras), sun};
  scene.validate();
  return scene;
}

void save_scene(const Scene& scene, const fs::path& path, VolumeStorage storage) {
  const VoxelGrid& grid = scene.grid;
  json doc;
  doc["grid"] = {{"shape", {grid.nx(), grid.ny(), grid.nz()}},
                 {"origin", vec3_json(grid.origin())},
                 {"voxel_size", vec3_json(grid.voxel_dims())}};
  doc["sun"] = {{"zenith_deg", scene.sun.zenith_deg},
                {"azimuth_deg", scene.sun.azimuth_deg},
                {"irradiance_ratio", scene.sun.irradiance_ratio}};
  std::array<double, 3> sigma_um2{};
  for (int c = 0; c < kNumChannels; ++c) sigma_um2[c] = scene.medium.aerosol.sigma[c] * 1e12;
  doc["aerosol"] = {{"sigma_um2", sigma_um2},
                    {"albedo", scene.medium.aerosol.albedo},
                    {"g", scene.medium.aerosol.g}};
  doc["albedo_air"] = scene.medium.albedo_air;

  const auto stem = path.stem().string();
  const fs::path dir = path.parent_path();
  VolumeHeader header{{grid.nx(), grid.ny(), grid.nz()}, grid.origin(), grid.voxel_dims(), "", ""};
  if (storage == VolumeStorage::Inline) {
    json channels = json::array();
    for (const auto& ch : scene.medium.beta_air) channels.push_back({{"values", ch}});
    doc["beta_air"] = {{"channels", channels}};
    doc["beta_aerosol"] = {{"values", scene.medium.beta_aerosol_green}};
  } else {
    json channels = json::array();
    for (int c = 0; c < kNumChannels; ++c) {
      const std::string name = fmt::format("{}_beta_air_{}.f32", stem, kChannelNames[c]);
      header.quantity = "beta_air";
      header.channel = std::string(1, kChannelNames[c]);
      write_volume(dir / name, scene.medium.beta_air[c], header);
      channels.push_back({{"raw", name}});
    }
    doc["beta_air"] = {{"channels", channels}};
    const std::string name = fmt::format("{}_beta_aerosol_G.f32", stem);
    header.quantity = "beta_aerosol";
    header.channel = "G";
    write_volume(dir / name, scene.medium.beta_aerosol_green, header);
    doc["beta_aerosol"] = {{"raw", name}};
  }

  json cams = json::array();
  for (const Camera& cam : scene.cameras) {
    cams.push_back({{"position", vec3_json(cam.position())}, {"pixels", {cam.width(), cam.height()}}});
  }
  doc["cameras"] = cams;

  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write scene file '{}'", path.string()));
  out << doc.dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Raw volumes

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
  }
  return v;
}

}  // namespace

void write_volume(const fs::path& path, std::span<const double> values, const VolumeHeader& header) {
  const std::size_t n = static_cast<std::size_t>(header.dims[0]) * header.dims[1] * header.dims[2];
  if (n != values.size()) {
    throw ValidationError("volume", fmt::format("header declares {} voxels, data has {}", n, values.size()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write volume '{}'", path.string()));
  for (double v : values) {
    const auto f = static_cast<float>(v);
    const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(f));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  json side = {{"dims", header.dims},
               {"origin", vec3_json(header.origin)},
               {"spacing", vec3_json(header.spacing)},
               {"quantity", header.quantity},
               {"channel", header.channel},
               {"dtype", "float32"},
               {"byte_order", "little"},
               {"layout", "x-fastest"}};
  std::ofstream hdr(fs::path(path.string() + ".json"));
  hdr << side.dump(1) << '\n';
}

std::vector<double> read_raw_f32(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ParseError(fmt::format("cannot open volume '{}'", path.string()));
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * 4) {
    throw ParseError(fmt::format("{}: expected {} float32 values, file holds {} bytes",
                                 path.string(), expected, bytes));
  }
  in.seekg(0);
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    out[i] = std::bit_cast<float>(to_little(bits));
  }
  return out;
}

std::vector<double> read_volume(const fs::path& path, VolumeHeader* header) {
  const fs::path side = path.string() + ".json";
  std::ifstream hin(side);
  if (!hin) throw ParseError(fmt::format("missing volume header '{}'", side.string()));
  json doc;
  try {
    doc = json::parse(hin);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", side.string(), e.what()));
  }
  VolumeHeader h;
  h.dims = get_as<std::array<int, 3>>(require(doc, "dims", side.string()), "dims");
  if (doc.contains("origin")) h.origin = get_vec3(doc.at("origin"), "origin");
  if (doc.contains("spacing")) h.spacing = get_vec3(doc.at("spacing"), "spacing");
  if (doc.contains("quantity")) h.quantity = doc.at("quantity").get<std::string>();
  if (doc.contains("channel")) h.channel = doc.at("channel").get<std::string>();
  if (header) *header = h;
  return read_raw_f32(path, static_cast<std::size_t>(h.dims[0]) * h.dims[1] * h.dims[2]);
}

}  // namespace skytomo
