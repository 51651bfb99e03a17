#pragma once

// Hierarchical density-based clustering (HDBSCAN) over points in R^d with the
// Euclidean metric.

#include <cstddef>
#include <span>
#include <vector>

#include "srcid/params.hpp"

namespace srcid {

// Row-major point matrix.
struct PointMatrix {
  std::vector<double> data;
  std::size_t dim = 0;

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

struct MstEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

// Distance to the k-th nearest neighbour, the point itself counting as the first.
std::vector<double> core_distances(const PointMatrix& points, int k);

// Minimum spanning tree of the mutual-reachability graph
// max(core_a, core_b, |a - b|). Exact O(N^2) Prim up to `exact_max_points`,
// kd-tree Boruvka above. Edges sorted by weight.
std::vector<MstEdge> mutual_reachability_mst(const PointMatrix& points, std::span<const double> core,
                                             std::size_t exact_max_points);

// Row of the condensed tree. Children below the point count are points,
// otherwise cluster labels; the root cluster is labelled with the point count.
struct CondensedRow {
  std::size_t parent = 0;
  std::size_t child = 0;
  double lambda = 0.0;
  std::size_t child_size = 0;
};

struct HdbscanOptions {
  int min_cluster_size = 5;
  int min_samples = 5;
  ClusterSelection selection = ClusterSelection::excess_of_mass;
  std::size_t exact_mst_max_points = 50000;
};

struct HdbscanResult {
  static constexpr int kNoise = -1;
  std::vector<int> labels;  // cluster index or kNoise, per point
  std::vector<double> probabilities;
  // Per output cluster: its condensed-tree label and stability.
  std::vector<std::size_t> cluster_nodes;
  std::vector<double> cluster_stability;
  std::vector<CondensedRow> condensed;

  std::size_t cluster_count() const { return cluster_nodes.size(); }
};

// Fewer points than the minimum cluster size yields all NOISE.
HdbscanResult hdbscan(const PointMatrix& points, const HdbscanOptions& options);

}  // namespace srcid
