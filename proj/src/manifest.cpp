#include "skytomo/manifest.hpp"

#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "skytomo/common.hpp"

namespace skytomo {

std::string git_blob_hash_bytes(const std::string& bytes) {
  const std::string header = fmt::format("blob {}", bytes.size());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size() + 1) != 1 ||  // with the NUL
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string git_blob_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return git_blob_hash_bytes(buf.str());
}

RunManifest::RunManifest(std::string command) : command_(std::move(command)) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_[path.string()] = git_blob_hash(path);
}

void RunManifest::add_output(const std::filesystem::path& path) {
  std::optional<std::string> hash;
  if (std::filesystem::is_regular_file(path)) hash = git_blob_hash(path);
  outputs_[path.string()] = hash;
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command_;
  j["config"] = config_;
  j["seeds"] = seeds_;
  j["inputs"] = inputs_;
  j["outputs"] = nlohmann::json::object();
  for (const auto& [path, hash] : outputs_) {
    j["outputs"][path] = hash ? nlohmann::json(*hash) : nlohmann::json(nullptr);
  }
  j["timings_s"] = timings_;
  return j;
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << to_json().dump(2) << "\n";
}

}  // namespace skytomo
