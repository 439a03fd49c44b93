#include "sgseg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <unordered_set>

#include "sgseg/error.hpp"
#include "sgseg/log.hpp"

namespace sgseg {

namespace {

std::uint64_t pair_key(MoleculeId i, MoleculeId j) {
  return (static_cast<std::uint64_t>(i) << 32) | j;
}

}  // namespace

std::size_t SignedGraph::count(EdgeSign sign) const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [&](const SignedEdge& e) { return e.sign == sign; }));
}

std::vector<NodePair> attractive_edges(const SpatialIndex& index, std::size_t m) {
  const std::size_t n = index.size();
  if (m == 0 || n <= m) {
    throw Error(ErrorCode::TooFewMolecules, "attractive edges need more than " +
                                                std::to_string(m) + " molecules, got " +
                                                std::to_string(n));
  }
  std::vector<NodePair> pairs;
  pairs.reserve(n * m);
  for (MoleculeId i = 0; i < n; ++i) {
    for (const Neighbor& nb : index.knn_of(i, m, SelfPolicy::Exclude)) {
      pairs.push_back({std::min(i, nb.id), std::max(i, nb.id)});
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

std::vector<RepulsivePair> repulsive_edges(const SpatialIndex& index,
                                           const RepulsiveOptions& options) {
  if (!(options.r_cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "R_cell must be > 0");
  if (!(options.inner_factor < options.outer_factor)) {
    throw Error(ErrorCode::InvalidRange, "repulsive annulus is empty");
  }
  const double r_min = options.inner_factor * options.r_cell;
  const double r_max = options.outer_factor * options.r_cell;
  const double r_inf = options.infinite_factor * options.r_cell;

  std::vector<RepulsivePair> out;
  std::unordered_set<std::uint64_t> seen;
  std::vector<MoleculeId> candidates;
  for (MoleculeId i = 0; i < index.size(); ++i) {
    candidates = index.annulus(index.position(i), r_min, r_max);
    Rng rng = Rng::derived(options.seed, i);
    const std::size_t take = std::min(options.per_node, candidates.size());
    // Partial Fisher-Yates: the first `take` slots become the sample.
    for (std::size_t s = 0; s < take; ++s) {
      const std::size_t pick = s + rng.index(candidates.size() - s);
      std::swap(candidates[s], candidates[pick]);
      const MoleculeId j = candidates[s];
      const MoleculeId a = std::min(i, j), b = std::max(i, j);
      if (!seen.insert(pair_key(a, b)).second) continue;
      const double d = distance(index.position(a), index.position(b));
      out.push_back({a, b, d > r_inf});
    }
  }
  return out;
}

SignedGraph weight_graph(const PairNet& net, const FeatureMatrix& features,
                         const std::vector<NodePair>& attractive,
                         const std::vector<RepulsivePair>& repulsive, GraphBuildStats* stats) {
  const std::size_t n = features.rows();
  const PairNet::Matrix latent = encode_all(net, features);
  std::vector<double> mass(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : features.row(i)) mass[i] += std::abs(v);
  }
  auto posterior = [&](MoleculeId i, MoleculeId j) {
    return sigmoid_of_distance(net, (latent.col(i) - latent.col(j)).norm());
  };
  auto check = [&](MoleculeId i, MoleculeId j) {
    if (i >= n || j >= n || i == j) {
      throw Error(ErrorCode::InvalidArgument, "edge endpoint out of range or self loop");
    }
  };

  SignedGraph graph;
  graph.node_count = n;
  graph.edges.reserve(attractive.size() + repulsive.size());
  std::unordered_set<std::uint64_t> attractive_keys;
  attractive_keys.reserve(attractive.size() * 2);
  for (const auto& [i, j] : attractive) {
    check(i, j);
    const MoleculeId a = std::min(i, j), b = std::max(i, j);
    if (!attractive_keys.insert(pair_key(a, b)).second) continue;
    const double rho = std::min(mass[a], mass[b]);
    graph.edges.push_back({a, b, EdgeSign::Attractive, rho * posterior(a, b)});
  }
  std::size_t conflicts = 0;
  std::unordered_set<std::uint64_t> repulsive_keys;
  for (const auto& r : repulsive) {
    check(r.i, r.j);
    const MoleculeId a = std::min(r.i, r.j), b = std::max(r.i, r.j);
    const auto key = pair_key(a, b);
    if (attractive_keys.contains(key)) {
      ++conflicts;
      continue;
    }
    if (!repulsive_keys.insert(key).second) continue;
    double w;
    if (r.force_infinite) {
      w = -std::numeric_limits<double>::infinity();
    } else {
      const double rho = std::min(mass[a], mass[b]);
      w = rho * (posterior(a, b) - 1.0);
    }
    graph.edges.push_back({a, b, EdgeSign::Repulsive, w});
  }
  if (conflicts > 0) {
    log_warning("dropped " + std::to_string(conflicts) +
                " repulsive edges whose endpoints are also joined by an attractive edge");
  }
  if (stats) stats->sign_conflicts_dropped = conflicts;
  return graph;
}

void write_graph(std::ostream& out, const SignedGraph& graph) {
  out << "i,j,sign,weight\n";
  for (const auto& e : graph.edges) {
    out << e.i << ',' << e.j << ',' << (e.sign == EdgeSign::Attractive ? "attractive" : "repulsive")
        << ',' << format_double(e.weight) << '\n';
  }
}

}  // namespace sgseg
