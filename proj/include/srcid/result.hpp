#pragma once

#include <variant>
#include <vector>

#include "srcid/datamodel.hpp"
#include "srcid/params.hpp"

namespace srcid {

struct GaussianSource {
  double amplitude = 1.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double theta = 0.0;
  Point2 center;
  double area = 0.0;
  int order_index = 0;
  // Fit diagnostics.
  double residual = 0.0;
  bool degraded = false;

  // Builds a source, fills `area` and wraps theta into [0, pi).
  static GaussianSource make(double amplitude, double sigma1, double sigma2, double theta, Point2 center,
                             int order_index = 0);
  void validate() const;
};

struct ClusterSource {
  Point2 midpoint;
  int member_count = 0;
  int cluster_id = 0;
  double persistence = 0.0;
};

enum class Method { sind, sihc };

const char* method_name(Method m);

struct Assignment {
  static constexpr int kNoise = -1;
  int source = kNoise;
  double confidence = 0.0;

  bool is_noise() const { return source == kNoise; }
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Outcome of one identification run over a SourcePartSet. `assignment` is
// parallel to SourcePartSet::parts().
struct IdentificationResult {
  Method method = Method::sind;
  std::vector<GaussianSource> gaussians;  // SIND
  std::vector<ClusterSource> clusters;    // SIHC
  std::vector<Assignment> assignment;
  std::variant<SindParams, SihcParams> params;

  std::size_t source_count() const { return method == Method::sind ? gaussians.size() : clusters.size(); }
  std::size_t noise_count() const;
  // Parts assigned to each source, per source index.
  std::vector<std::size_t> member_counts() const;
  void validate(std::size_t part_count) const;
};

}  // namespace srcid
