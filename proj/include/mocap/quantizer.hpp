#pragma once

// Uniform scalar quantization with a dead zone at half a step.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mocap/error.hpp"

namespace mocap {

struct QuantizerSpec {
  int bits = 12;
  float max_abs = 0.0f;

  QuantizerSpec() = default;
  QuantizerSpec(int b, float scale) : bits(b), max_abs(scale) {
    require(b >= 2 && b <= 16, errc::invalid_argument, "quantizer bits must be in [2, 16], got " + std::to_string(b));
    require(std::isfinite(scale) && scale >= 0.0f, errc::invalid_argument, "quantizer scale must be finite and >= 0");
  }

  /// Spec for a segment whose peak magnitude is `peak`; the scale is rounded up to
  /// the next f32 so the stored header value still bounds every coefficient.
  static QuantizerSpec for_peak(int b, double peak) {
    require(std::isfinite(peak) && peak >= 0.0, errc::non_finite_value, "coefficient peak is not finite");
    float s = static_cast<float>(peak);
    if (static_cast<double>(s) < peak) s = std::nextafter(s, std::numeric_limits<float>::infinity());
    require(std::isfinite(s), errc::invalid_argument, "coefficient peak exceeds f32 range");
    return {b, s};
  }

  int max_index() const { return (1 << (bits - 1)) - 1; }
  double step() const { return static_cast<double>(max_abs) / max_index(); }
};

/// Nonzero quantized entries of one coefficient vector, locations strictly increasing.
struct SparseVectorCode {
  std::vector<std::uint32_t> locations;
  std::vector<std::int32_t> values;

  std::size_t count() const { return locations.size(); }
  bool operator==(const SparseVectorCode&) const = default;
};

/// q_j = round(c_j / step), half away from zero; zero indices are dropped.
inline SparseVectorCode quantize(const Eigen::Ref<const Eigen::VectorXd>& coeffs, const QuantizerSpec& spec) {
  SparseVectorCode code;
  const double step = spec.step();
  const double limit = static_cast<double>(spec.max_abs) + step / 2.0;
  const int qmax = spec.max_index();
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    const double c = coeffs(j);
    require(std::abs(c) <= limit, errc::invalid_argument,
            "coefficient " + std::to_string(c) + " exceeds quantizer range " + std::to_string(spec.max_abs));
    if (step == 0.0) continue;
    auto q = static_cast<std::int64_t>(std::round(c / step));
    if (q > qmax) q = qmax;
    if (q < -qmax) q = -qmax;
    if (q == 0) continue;
    code.locations.push_back(static_cast<std::uint32_t>(j));
    code.values.push_back(static_cast<std::int32_t>(q));
  }
  return code;
}

inline Eigen::VectorXd dequantize(const SparseVectorCode& code, const QuantizerSpec& spec, int length) {
  require(code.locations.size() == code.values.size(), errc::invalid_argument, "code has mismatched fields");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(length);
  const double step = spec.step();
  for (std::size_t k = 0; k < code.count(); ++k) {
    const auto loc = code.locations[k];
    require(loc < static_cast<std::uint32_t>(length), errc::invalid_argument,
            "location " + std::to_string(loc) + " outside vector of length " + std::to_string(length));
    out(loc) = code.values[k] * step;
  }
  return out;
}

}  // namespace mocap
