#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "sgseg/graph.hpp"

namespace sgseg {

/// Union-find whose roots carry the set of roots they may never merge with.
class ConstrainedUnionFind {
 public:
  explicit ConstrainedUnionFind(std::size_t n);

  std::uint32_t find(std::uint32_t x);
  bool same(std::uint32_t a, std::uint32_t b) { return find(a) == find(b); }
  /// True when the components of a and b are forbidden to merge.
  bool constrained(std::uint32_t a, std::uint32_t b);
  /// Merges unless already joined or constrained; returns whether it merged.
  bool merge(std::uint32_t a, std::uint32_t b);
  /// Forbids merging the two components; false if they are already one.
  bool add_mutex(std::uint32_t a, std::uint32_t b);

  std::size_t size() const { return parent_.size(); }
  const std::unordered_set<std::uint32_t>& mutex_of_root(std::uint32_t root) const {
    return mutex_[root];
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::vector<std::unordered_set<std::uint32_t>> mutex_;
};

struct Partition {
  /// Dense component ids, numbered in order of each component's lowest node.
  std::vector<std::uint32_t> labels;
  std::size_t component_count = 0;
  /// Insertion ids of attractive edges that caused a merge.
  std::vector<std::size_t> active_attractive;
  /// Insertion ids of repulsive edges that became mutex constraints.
  std::vector<std::size_t> active_repulsive;
};

/// Greedy signed-graph partitioning. Edges are visited by descending
/// |weight| (-inf first), ties by ascending insertion id; zero-weight edges
/// are skipped. Attractive edges merge unless forbidden, repulsive edges
/// add a constraint unless their endpoints are already merged.
/// When `order` is given it receives the visited (non-skipped) edge ids.
Partition mutex_watershed(const SignedGraph& graph, std::vector<std::size_t>* order = nullptr);

/// Same greedy rule with explicit member lists and node-level constraint
/// pairs, for cross-checking on tiny graphs (n <= 12, <= 30 edges).
Partition oracle_partition(const SignedGraph& graph);

/// Renumbers arbitrary labels densely in order of first occurrence.
std::vector<std::uint32_t> canonical_labels(const std::vector<std::uint32_t>& labels);

/// Human-readable descriptions of violated partition invariants; empty if none.
std::vector<std::string> partition_violations(const SignedGraph& graph, const Partition& partition);

/// Appends -inf repulsive edges between every pair of the given molecules,
/// e.g. markers of distinct nuclei. Pairs already joined attractively are skipped.
void add_exclusive_markers(SignedGraph& graph, const std::vector<MoleculeId>& markers);

}  // namespace sgseg
