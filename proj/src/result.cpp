#include "srcid/result.hpp"

#include <cmath>
#include <numbers>

namespace srcid {

GaussianSource GaussianSource::make(double amplitude, double sigma1, double sigma2, double theta, Point2 center,
                                    int order_index) {
  GaussianSource s;
  s.amplitude = amplitude;
  s.sigma1 = sigma1;
  s.sigma2 = sigma2;
  s.theta = std::fmod(std::fmod(theta, std::numbers::pi) + std::numbers::pi, std::numbers::pi);
  if (s.theta >= std::numbers::pi) s.theta = 0.0;
  s.center = center;
  s.order_index = order_index;
  s.area = 2.0 * std::numbers::pi * amplitude * sigma1 * sigma2;
  s.validate();
  return s;
}

void GaussianSource::validate() const {
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) throw Error(ErrorKind::input, "GaussianSource: amplitude must be > 0");
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw Error(ErrorKind::input, "GaussianSource: widths must be > 0");
  if (!(theta >= 0.0 && theta < std::numbers::pi)) throw Error(ErrorKind::input, "GaussianSource: theta must lie in [0, pi)");
  if (!std::isfinite(center.x1) || !std::isfinite(center.x2))
    throw Error(ErrorKind::input, "GaussianSource: center must be finite");
}

const char* method_name(Method m) { return m == Method::sind ? "sind" : "sihc"; }

std::size_t IdentificationResult::noise_count() const {
  std::size_t n = 0;
  for (const auto& a : assignment) n += a.is_noise() ? 1 : 0;
  return n;
}

std::vector<std::size_t> IdentificationResult::member_counts() const {
  std::vector<std::size_t> counts(source_count(), 0);
  for (const auto& a : assignment)
    if (!a.is_noise()) ++counts[static_cast<std::size_t>(a.source)];
  return counts;
}

void IdentificationResult::validate(std::size_t part_count) const {
  if (assignment.size() != part_count)
    throw Error(ErrorKind::shape, "IdentificationResult: assignment not parallel to the part set");
  const int n = static_cast<int>(source_count());
  for (const auto& a : assignment) {
    if (a.source < Assignment::kNoise || a.source >= n)
      throw Error(ErrorKind::range, "IdentificationResult: assignment refers to an unknown source");
    if (!(a.confidence >= 0.0 && a.confidence <= 1.0))
      throw Error(ErrorKind::range, "IdentificationResult: confidence outside [0, 1]");
    if (a.is_noise() && a.confidence != 0.0)
      throw Error(ErrorKind::input, "IdentificationResult: NOISE parts carry confidence 0");
  }
}

}  // namespace srcid
