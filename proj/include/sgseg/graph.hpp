#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sgseg/features.hpp"
#include "sgseg/pairnet.hpp"
#include "sgseg/spatial_index.hpp"

namespace sgseg {

enum class EdgeSign : std::uint8_t { Attractive, Repulsive };

struct SignedEdge {
  MoleculeId i, j;  // i < j
  EdgeSign sign;
  double weight;  // >= 0 when attractive, <= 0 (possibly -inf) when repulsive
};

struct SignedGraph {
  std::size_t node_count = 0;
  /// Position in this vector is the edge's insertion id.
  std::vector<SignedEdge> edges;

  std::size_t count(EdgeSign sign) const;
};

struct NodePair {
  MoleculeId i, j;
  auto operator<=>(const NodePair&) const = default;
};

struct RepulsivePair {
  MoleculeId i, j;
  bool force_infinite;
  bool operator==(const RepulsivePair&) const = default;
};

/// Each molecule joined to its m nearest other molecules; canonical i < j,
/// deduplicated, sorted.
std::vector<NodePair> attractive_edges(const SpatialIndex& index, std::size_t m = 5);

struct RepulsiveOptions {
  double r_cell = 8.0;
  std::size_t per_node = 15;
  double inner_factor = 2.0;     // annulus open lower bound, in R_cell
  double outer_factor = 6.0;     // annulus closed upper bound
  double infinite_factor = 4.0;  // strictly beyond this the edge is -inf
  std::uint64_t seed = 0;
};

/// Up to per_node partners per molecule, uniform without replacement from
/// its annulus. Each molecule has its own RNG stream derived from
/// (seed, molecule id). A pair drawn from both ends is kept once, in the
/// position of its first draw.
std::vector<RepulsivePair> repulsive_edges(const SpatialIndex& index, const RepulsiveOptions& options);

struct GraphBuildStats {
  std::size_t sign_conflicts_dropped = 0;
};

/// Attractive weight rho * y, repulsive weight rho * (y - 1), or -inf when
/// forced. Attractive edges come first in insertion order. A repulsive pair
/// that is also attractive is dropped.
SignedGraph weight_graph(const PairNet& net, const FeatureMatrix& features,
                         const std::vector<NodePair>& attractive,
                         const std::vector<RepulsivePair>& repulsive,
                         GraphBuildStats* stats = nullptr);

/// i,j,sign,weight with -inf written literally.
void write_graph(std::ostream& out, const SignedGraph& graph);

}  // namespace sgseg
