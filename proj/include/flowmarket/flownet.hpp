#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowmarket/rng.hpp"
#include "flowmarket/types.hpp"

namespace flowmarket {

// Directed arc as (tail, head), 0-based node ids.
struct Arc {
  int tail = 0;
  int head = 0;

  friend bool operator==(const Arc& a, const Arc& b) {
    return a.tail == b.tail && a.head == b.head;
  }
};

namespace detail {

inline bool undirected_connected(int n, const std::vector<Arc>& arcs) {
  if (n <= 0) return false;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const Arc& a : arcs) {
    adj[static_cast<std::size_t>(a.tail)].push_back(a.head);
    adj[static_cast<std::size_t>(a.head)].push_back(a.tail);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  return reached == n;
}

}  // namespace detail

// Capacitated directed network. Every instance is validated on construction:
// capacities strictly positive and finite, no self-loops, arc endpoints in
// range, and the underlying undirected graph connected.
class FlowNetwork {
 public:
  FlowNetwork() = default;

  FlowNetwork(int node_count, std::vector<Arc> arc_list, Vector capacities)
      : n_(node_count), arcs_(std::move(arc_list)), u_(std::move(capacities)) {
    if (n_ < 2) throw std::invalid_argument("FlowNetwork: need at least 2 nodes");
    if (arcs_.empty()) throw std::invalid_argument("FlowNetwork: need at least 1 arc");
    if (static_cast<std::size_t>(u_.size()) != arcs_.size())
      throw std::invalid_argument("FlowNetwork: capacity count must match arc count");
    for (std::size_t k = 0; k < arcs_.size(); ++k) {
      const Arc& a = arcs_[k];
      if (a.tail < 0 || a.tail >= n_ || a.head < 0 || a.head >= n_)
        throw std::invalid_argument("FlowNetwork: arc endpoint out of range");
      if (a.tail == a.head) throw std::invalid_argument("FlowNetwork: self-loop not allowed");
      const double cap = u_(static_cast<Eigen::Index>(k));
      if (!(cap > 0.0) || !std::isfinite(cap))
        throw std::invalid_argument("FlowNetwork: capacities must be strictly positive and finite");
    }
    if (!detail::undirected_connected(n_, arcs_))
      throw std::invalid_argument("FlowNetwork: underlying undirected graph must be connected");
  }

  int node_count() const { return n_; }
  int arc_count() const { return static_cast<int>(arcs_.size()); }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const Vector& capacities() const { return u_; }

 private:
  int n_ = 0;
  std::vector<Arc> arcs_;
  Vector u_;
};

// Node-arc incidence and its positive/negative parts. Column k carries +1 at
// the arc's tail and -1 at its head, so A * y is the per-node net export.
struct IncidenceSet {
  Matrix A;
  Matrix Aplus;
  Matrix Aminus;
};

inline IncidenceSet build_incidence(const FlowNetwork& net) {
  const int n = net.node_count();
  const int m = net.arc_count();
  IncidenceSet inc;
  inc.A = Matrix::Zero(n, m);
  for (int k = 0; k < m; ++k) {
    const Arc& a = net.arcs()[static_cast<std::size_t>(k)];
    inc.A(a.tail, k) = 1.0;
    inc.A(a.head, k) = -1.0;
  }
  inc.Aplus = inc.A.cwiseMax(0.0);
  inc.Aminus = inc.A.cwiseMin(0.0);
  return inc;
}

// Net export per node for arc flows y, computed arc-wise without forming the
// incidence matrix. Entries sum to zero identically.
inline Vector net_flow(const FlowNetwork& net, const Vector& y) {
  if (y.size() != net.arc_count())
    throw std::invalid_argument("net_flow: flow vector length must match arc count");
  Vector e = Vector::Zero(net.node_count());
  for (int k = 0; k < net.arc_count(); ++k) {
    const Arc& a = net.arcs()[static_cast<std::size_t>(k)];
    e(a.tail) += y(k);
    e(a.head) -= y(k);
  }
  return e;
}

// Range of net exports node i can realize when all arcs run anywhere between
// empty and full: (-sum of inbound capacities, +sum of outbound capacities).
inline std::pair<double, double> capacity_bounds(const FlowNetwork& net, int node) {
  if (node < 0 || node >= net.node_count())
    throw std::invalid_argument("capacity_bounds: node out of range");
  double lo = 0.0;
  double hi = 0.0;
  for (int k = 0; k < net.arc_count(); ++k) {
    const Arc& a = net.arcs()[static_cast<std::size_t>(k)];
    if (a.tail == node) hi += net.capacities()(k);
    if (a.head == node) lo -= net.capacities()(k);
  }
  return {lo, hi};
}

// Random connected network: an Erdos-Renyi G(n, M) undirected sample with both
// arc directions added per edge and i.i.d. uniform capacities on
// (cap_low, cap_high]. Resamples until connected, up to 10000 attempts.
inline FlowNetwork generate_er(int n, int edge_count, double cap_low, double cap_high,
                               std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_er: need at least 2 nodes");
  const long long max_edges = static_cast<long long>(n) * (n - 1) / 2;
  if (edge_count < n - 1)
    throw std::invalid_argument("generate_er: too few edges for a connected graph");
  if (edge_count > max_edges)
    throw std::invalid_argument("generate_er: more edges than distinct node pairs");
  if (!(cap_low >= 0.0) || !(cap_high > cap_low))
    throw std::invalid_argument("generate_er: need 0 <= cap_low < cap_high");

  std::vector<std::pair<int, int>> all_pairs;
  all_pairs.reserve(static_cast<std::size_t>(max_edges));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) all_pairs.emplace_back(i, j);

  Rng rng(derive_seed(seed, /*tag=*/0x6e657477ULL));
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::pair<int, int>> pool = all_pairs;
    std::vector<Arc> arcs;
    arcs.reserve(2 * static_cast<std::size_t>(edge_count));
    for (int e = 0; e < edge_count; ++e) {
      const std::size_t pick =
          static_cast<std::size_t>(e) +
          static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(pool.size() - static_cast<std::size_t>(e))));
      std::swap(pool[static_cast<std::size_t>(e)], pool[pick]);
      const auto [i, j] = pool[static_cast<std::size_t>(e)];
      arcs.push_back({i, j});
      arcs.push_back({j, i});
    }
    if (!detail::undirected_connected(n, arcs)) continue;
    Vector u(arcs.size());
    for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = rng.uniform_positive(cap_low, cap_high);
    return FlowNetwork(n, std::move(arcs), std::move(u));
  }
  throw std::runtime_error("generate_er: no connected sample within attempt budget");
}

// Star with node 0 at the center: arcs 0 -> k for k = 1..n-1, then k -> 0 in
// the same leaf order. Capacities are given per arc in that order.
inline FlowNetwork star_graph(int n, const Vector& u) {
  if (n < 2) throw std::invalid_argument("star_graph: need at least 2 nodes");
  if (u.size() != 2 * (n - 1))
    throw std::invalid_argument("star_graph: need one capacity per arc, 2*(n-1) total");
  std::vector<Arc> arcs;
  arcs.reserve(static_cast<std::size_t>(2 * (n - 1)));
  for (int k = 1; k < n; ++k) arcs.push_back({0, k});
  for (int k = 1; k < n; ++k) arcs.push_back({k, 0});
  return FlowNetwork(n, std::move(arcs), u);
}

// True iff the network has exactly the star_graph arc layout.
inline bool is_canonical_star(const FlowNetwork& net) {
  const int n = net.node_count();
  if (n < 2) return false;
  if (net.arc_count() != 2 * (n - 1)) return false;
  for (int k = 1; k < n; ++k) {
    if (!(net.arcs()[static_cast<std::size_t>(k - 1)] == Arc{0, k})) return false;
    if (!(net.arcs()[static_cast<std::size_t>(n - 2 + k)] == Arc{k, 0})) return false;
  }
  return true;
}

}  // namespace flowmarket
