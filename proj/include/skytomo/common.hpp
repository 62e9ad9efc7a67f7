#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skytomo {

using Vec3 = Eigen::Vector3d;

inline constexpr int kNumChannels = 3;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInvFourPi = 1.0 / (4.0 * std::numbers::pi);

/// Color channels, in the order used for every per-channel array.
enum class Channel : int { R = 0, G = 1, B = 2 };

inline constexpr std::array<char, kNumChannels> kChannelNames = {'R', 'G', 'B'};

int parse_channel(char name);

/// Raised when input data violates an invariant. The message names the field.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed input file.
class ParseError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The optimizer produced a non-finite cost.
class DivergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace skytomo
