#include "srcid/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

#include "srcid/datamodel.hpp"
#include "srcid/parallel.hpp"

namespace srcid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

class KdTree {
 public:
  struct Node {
    std::size_t begin = 0, end = 0;
    int left = -1, right = -1;
    std::vector<double> lo, hi;
    double min_core = 0.0;
    long component = -1;  // shared component of all points, or -1
  };

  explicit KdTree(const PointMatrix& pts) : pts_(pts), order_(pts.size()) {
    std::iota(order_.begin(), order_.end(), 0);
    if (!order_.empty()) build(0, order_.size());
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& nodes() { return nodes_; }
  const std::vector<std::size_t>& order() const { return order_; }

  double box_distance2(const Node& n, std::span<const double> q) const {
    double s = 0.0;
    for (std::size_t d = 0; d < q.size(); ++d) {
      const double v = q[d] < n.lo[d] ? n.lo[d] - q[d] : (q[d] > n.hi[d] ? q[d] - n.hi[d] : 0.0);
      s += v * v;
    }
    return s;
  }

  // Squared distances of the k nearest points to q (including q itself if in the set).
  double kth_distance2(std::span<const double> q, int k) const {
    std::priority_queue<double> heap;
    knn(0, q, static_cast<std::size_t>(k), heap);
    return heap.top();
  }

 private:
  static constexpr std::size_t kLeaf = 16;

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Node n;
    n.begin = begin;
    n.end = end;
    n.lo.assign(pts_.dim, kInf);
    n.hi.assign(pts_.dim, -kInf);
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = pts_.row(order_[i]);
      for (std::size_t d = 0; d < pts_.dim; ++d) {
        n.lo[d] = std::min(n.lo[d], r[d]);
        n.hi[d] = std::max(n.hi[d], r[d]);
      }
    }
    if (end - begin > kLeaf) {
      std::size_t axis = 0;
      for (std::size_t d = 1; d < pts_.dim; ++d)
        if (n.hi[d] - n.lo[d] > n.hi[axis] - n.lo[axis]) axis = d;
      const std::size_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + static_cast<long>(begin), order_.begin() + static_cast<long>(mid),
                       order_.begin() + static_cast<long>(end), [&](std::size_t a, std::size_t b) {
                         const double va = pts_.row(a)[axis], vb = pts_.row(b)[axis];
                         return va < vb || (va == vb && a < b);
                       });
      n.left = build(begin, mid);
      n.right = build(mid, end);
    }
    nodes_[static_cast<std::size_t>(id)] = std::move(n);
    return id;
  }

  void knn(int id, std::span<const double> q, std::size_t k, std::priority_queue<double>& heap) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (heap.size() == k && box_distance2(n, q) > heap.top()) return;
    if (n.left < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const double d = squared_distance(q, pts_.row(order_[i]));
        if (heap.size() < k) heap.push(d);
        else if (d < heap.top()) {
          heap.pop();
          heap.push(d);
        }
      }
      return;
    }
    const double dl = box_distance2(nodes_[static_cast<std::size_t>(n.left)], q);
    const double dr = box_distance2(nodes_[static_cast<std::size_t>(n.right)], q);
    if (dl <= dr) {
      knn(n.left, q, k, heap);
      knn(n.right, q, k, heap);
    } else {
      knn(n.right, q, k, heap);
      knn(n.left, q, k, heap);
    }
  }

  const PointMatrix& pts_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

// Lexicographic (weight, a, b) ordering gives a unique MST under ties.
bool edge_less(const MstEdge& x, const MstEdge& y) {
  return std::tie(x.weight, x.a, x.b) < std::tie(y.weight, y.a, y.b);
}

MstEdge make_edge(std::size_t i, std::size_t j, double w) { return {std::min(i, j), std::max(i, j), w}; }

std::vector<MstEdge> prim_mst(const PointMatrix& pts, std::span<const double> core) {
  const std::size_t n = pts.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, kInf);
  std::vector<std::size_t> from(n, 0);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    const auto cr = pts.row(current);
    std::size_t next = n;
    double next_w = kInf;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double w = std::max({core[current], core[j], std::sqrt(squared_distance(cr, pts.row(j)))});
      if (w < best[j] || (w == best[j] && current < from[j])) {
        best[j] = w;
        from[j] = current;
      }
      if (best[j] < next_w) {
        next_w = best[j];
        next = j;
      }
    }
    in_tree[next] = true;
    edges.push_back(make_edge(from[next], next, next_w));
    current = next;
  }
  return edges;
}

std::vector<MstEdge> boruvka_mst(const PointMatrix& pts, std::span<const double> core) {
  const std::size_t n = pts.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  KdTree tree(pts);
  auto& nodes = tree.nodes();
  const auto& order = tree.order();
  UnionFind uf(n);
  std::vector<long> comp(n);

  for (int id = static_cast<int>(nodes.size()) - 1; id >= 0; --id) {
    auto& nd = nodes[static_cast<std::size_t>(id)];
    nd.min_core = kInf;
    for (std::size_t i = nd.begin; i < nd.end; ++i) nd.min_core = std::min(nd.min_core, core[order[i]]);
  }

  std::size_t components = n;
  while (components > 1) {
    for (std::size_t i = 0; i < n; ++i) comp[i] = static_cast<long>(uf.find(i));
    // Children have larger ids than parents, so a reverse sweep is bottom-up.
    for (int id = static_cast<int>(nodes.size()) - 1; id >= 0; --id) {
      auto& nd = nodes[static_cast<std::size_t>(id)];
      if (nd.left < 0) {
        nd.component = comp[order[nd.begin]];
        for (std::size_t i = nd.begin + 1; i < nd.end; ++i)
          if (comp[order[i]] != nd.component) nd.component = -1;
      } else {
        const long l = nodes[static_cast<std::size_t>(nd.left)].component;
        const long r = nodes[static_cast<std::size_t>(nd.right)].component;
        nd.component = l == r ? l : -1;
      }
    }

    std::vector<MstEdge> best(n, MstEdge{0, 0, kInf});
    for (std::size_t i = 0; i < n; ++i) {
      const long ci = comp[i];
      MstEdge& cb = best[static_cast<std::size_t>(ci)];
      const auto q = pts.row(i);
      if (core[i] > cb.weight) continue;
      // Depth-first search with pruning on the mutual-reachability lower bound.
      std::vector<int> stack{0};
      while (!stack.empty()) {
        const auto& nd = nodes[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (nd.component == ci) continue;
        const double lb = std::max({core[i], nd.min_core, std::sqrt(tree.box_distance2(nd, q))});
        if (lb > cb.weight) continue;
        if (nd.left < 0) {
          for (std::size_t k = nd.begin; k < nd.end; ++k) {
            const std::size_t j = order[k];
            if (comp[j] == ci) continue;
            const MstEdge e = make_edge(i, j, std::max({core[i], core[j], std::sqrt(squared_distance(q, pts.row(j)))}));
            if (edge_less(e, cb)) cb = e;
          }
          continue;
        }
        const auto& l = nodes[static_cast<std::size_t>(nd.left)];
        const auto& r = nodes[static_cast<std::size_t>(nd.right)];
        // Push the farther child first so the nearer one is explored first.
        if (tree.box_distance2(l, q) <= tree.box_distance2(r, q)) {
          stack.push_back(nd.right);
          stack.push_back(nd.left);
        } else {
          stack.push_back(nd.left);
          stack.push_back(nd.right);
        }
      }
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (static_cast<long>(c) != comp[c] || best[c].weight == kInf) continue;
      if (uf.unite(best[c].a, best[c].b)) {
        edges.push_back(best[c]);
        --components;
      }
    }
  }
  return edges;
}

struct LinkageNode {
  std::size_t left = 0, right = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

// Single-linkage dendrogram; node n + k is the k-th merge.
std::vector<LinkageNode> single_linkage(const std::vector<MstEdge>& mst, std::size_t n) {
  std::vector<LinkageNode> tree;
  tree.reserve(mst.size());
  std::vector<std::size_t> parent(2 * n, 0), label(n), sizes(2 * n, 1);
  std::iota(parent.begin(), parent.end(), 0);
  std::iota(label.begin(), label.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : mst) {
    const std::size_t ra = find(e.a), rb = find(e.b);
    const std::size_t id = n + tree.size();
    tree.push_back({label[ra], label[rb], e.weight, sizes[label[ra]] + sizes[label[rb]]});
    sizes[id] = tree.back().size;
    parent[rb] = ra;
    label[ra] = id;
  }
  return tree;
}

std::vector<CondensedRow> condense(const std::vector<LinkageNode>& tree, std::size_t n, std::size_t min_size) {
  std::vector<CondensedRow> rows;
  if (tree.empty()) return rows;
  const std::size_t root = n + tree.size() - 1;
  auto node_size = [&](std::size_t x) { return x < n ? std::size_t{1} : tree[x - n].size; };
  auto emit_points = [&](std::size_t sub, std::size_t parent, double lambda) {
    std::vector<std::size_t> stack{sub};
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      if (x < n) rows.push_back({parent, x, lambda, 1});
      else {
        stack.push_back(tree[x - n].left);
        stack.push_back(tree[x - n].right);
      }
    }
  };

  std::vector<std::size_t> relabel(root + 1, 0);
  relabel[root] = n;
  std::size_t next_label = n + 1;
  std::deque<std::size_t> queue{root};
  while (!queue.empty()) {
    const std::size_t x = queue.front();
    queue.pop_front();
    const LinkageNode& nd = tree[x - n];
    const double lambda = nd.distance > 0.0 ? 1.0 / nd.distance : kInf;
    const std::size_t ls = node_size(nd.left), rs = node_size(nd.right);
    const std::size_t parent = relabel[x];
    if (ls >= min_size && rs >= min_size) {
      for (std::size_t c : {nd.left, nd.right}) {
        relabel[c] = next_label++;
        rows.push_back({parent, relabel[c], lambda, node_size(c)});
        queue.push_back(c);
      }
    } else {
      for (std::size_t c : {nd.left, nd.right}) {
        if (node_size(c) >= min_size) {
          relabel[c] = parent;
          queue.push_back(c);
        } else {
          emit_points(c, parent, lambda);
        }
      }
    }
  }
  return rows;
}

}  // namespace

std::vector<double> core_distances(const PointMatrix& points, int k) {
  if (k < 1) throw Error(ErrorKind::config, "core_distances: k must be >= 1");
  const std::size_t n = points.size();
  std::vector<double> core(n, 0.0);
  if (n == 0) return core;
  const int kk = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k), n));
  KdTree tree(points);
  parallel_for(n, [&](std::size_t i) { core[i] = std::sqrt(tree.kth_distance2(points.row(i), kk)); });
  return core;
}

std::vector<MstEdge> mutual_reachability_mst(const PointMatrix& points, std::span<const double> core,
                                             std::size_t exact_max_points) {
  if (core.size() != points.size()) throw Error(ErrorKind::shape, "mutual_reachability_mst: core size mismatch");
  std::vector<MstEdge> edges =
      points.size() <= exact_max_points ? prim_mst(points, core) : boruvka_mst(points, core);
  std::sort(edges.begin(), edges.end(), edge_less);
  return edges;
}

HdbscanResult hdbscan(const PointMatrix& points, const HdbscanOptions& options) {
  if (options.min_cluster_size < 2) throw Error(ErrorKind::config, "hdbscan: min_cluster_size must be >= 2");
  if (options.min_samples < 1) throw Error(ErrorKind::config, "hdbscan: min_samples must be >= 1");
  const std::size_t n = points.size();
  HdbscanResult out;
  out.labels.assign(n, HdbscanResult::kNoise);
  out.probabilities.assign(n, 0.0);
  const std::size_t mcs = static_cast<std::size_t>(options.min_cluster_size);
  if (n < mcs || n < 2) return out;

  const std::vector<double> core = core_distances(points, options.min_samples);
  const std::vector<MstEdge> mst = mutual_reachability_mst(points, core, options.exact_mst_max_points);
  out.condensed = condense(single_linkage(mst, n), n, mcs);

  // Cluster labels run from n (root) upward; children always carry larger labels.
  std::size_t max_label = n;
  for (const auto& r : out.condensed) {
    max_label = std::max(max_label, r.parent);
    if (r.child >= n) max_label = std::max(max_label, r.child);
  }
  const std::size_t m = max_label - n + 1;
  std::vector<double> birth(m, 0.0), stability(m, 0.0);
  std::vector<long> parent_of(m, -1);
  std::vector<std::vector<std::size_t>> children(m);
  for (const auto& r : out.condensed)
    if (r.child >= n) {
      birth[r.child - n] = r.lambda;
      parent_of[r.child - n] = static_cast<long>(r.parent - n);
      children[r.parent - n].push_back(r.child - n);
    }
  for (const auto& r : out.condensed) {
    const double lam = std::isinf(r.lambda) ? std::numeric_limits<double>::max() : r.lambda;
    stability[r.parent - n] += (lam - birth[r.parent - n]) * static_cast<double>(r.child_size);
  }

  std::vector<bool> selected(m, false);
  if (options.selection == ClusterSelection::leaf) {
    for (std::size_t c = 1; c < m; ++c) selected[c] = children[c].empty();
  } else {
    std::vector<double> best = stability;
    for (std::size_t c = m; c-- > 1;) selected[c] = true;
    auto deselect_below = [&](std::size_t c) {
      std::vector<std::size_t> stack(children[c].begin(), children[c].end());
      while (!stack.empty()) {
        const std::size_t x = stack.back();
        stack.pop_back();
        selected[x] = false;
        stack.insert(stack.end(), children[x].begin(), children[x].end());
      }
    };
    for (std::size_t c = m; c-- > 1;) {
      double sub = 0.0;
      for (std::size_t ch : children[c]) sub += best[ch];
      if (!children[c].empty() && sub > stability[c]) {
        selected[c] = false;
        best[c] = sub;
      } else {
        deselect_below(c);
      }
    }
  }

  // Nearest selected ancestor (or itself) of every cluster node; -1 if none.
  std::vector<long> owner(m, -1);
  for (std::size_t c = 0; c < m; ++c) {
    if (selected[c]) owner[c] = static_cast<long>(c);
    else if (parent_of[c] >= 0) owner[c] = owner[static_cast<std::size_t>(parent_of[c])];
  }
  std::vector<long> output_index(m, -1);
  for (std::size_t c = 0; c < m; ++c)
    if (selected[c]) {
      output_index[c] = static_cast<long>(out.cluster_nodes.size());
      out.cluster_nodes.push_back(c + n);
      out.cluster_stability.push_back(stability[c]);
    }

  std::vector<double> lambda_max(m, 0.0);
  std::vector<double> point_lambda(n, 0.0);
  std::vector<long> point_owner(n, -1);
  for (const auto& r : out.condensed)
    if (r.child < n) {
      point_lambda[r.child] = r.lambda;
      point_owner[r.child] = owner[r.parent - n];
      if (point_owner[r.child] >= 0) {
        double& lm = lambda_max[static_cast<std::size_t>(point_owner[r.child])];
        lm = std::max(lm, r.lambda);
      }
    }
  for (std::size_t i = 0; i < n; ++i) {
    const long c = point_owner[i];
    if (c < 0) continue;
    const std::size_t cu = static_cast<std::size_t>(c);
    out.labels[i] = static_cast<int>(output_index[cu]);
    const double span = lambda_max[cu] - birth[cu];
    double p = 1.0;
    if (span > 0.0 && std::isfinite(span)) p = std::clamp((point_lambda[i] - birth[cu]) / span, 0.0, 1.0);
    else if (std::isinf(span)) p = std::isinf(point_lambda[i]) ? 1.0 : 0.0;
    // Members keep a strictly positive probability.
    out.probabilities[i] = std::max(p, 1e-12);
  }
  return out;
}

}  // namespace srcid
