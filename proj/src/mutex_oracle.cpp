#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>

#include "sgseg/error.hpp"
#include "sgseg/mutex_watershed.hpp"

// Deliberately naive re-implementation of the greedy rule; shares nothing
// with mutex_watershed.cpp beyond the data types.

namespace sgseg {

namespace {

double strength(double w) { return std::isinf(w) ? INFINITY : std::fabs(w); }

}  // namespace

Partition oracle_partition(const SignedGraph& graph) {
  if (graph.node_count > 12 || graph.edges.size() > 30) {
    throw Error(ErrorCode::InstanceTooLarge, "oracle handles at most 12 nodes and 30 edges");
  }
  for (const auto& e : graph.edges) {
    if (e.i >= graph.node_count || e.j >= graph.node_count || e.i == e.j || std::isnan(e.weight)) {
      throw Error(ErrorCode::InvalidArgument, "invalid edge in oracle input");
    }
  }
  const std::size_t n = graph.node_count;
  std::vector<std::size_t> component(n);
  std::iota(component.begin(), component.end(), std::size_t{0});
  std::vector<std::pair<MoleculeId, MoleculeId>> mutex_pairs;

  Partition partition;
  std::vector<bool> done(graph.edges.size(), false);
  for (std::size_t step = 0; step < graph.edges.size(); ++step) {
    // Selection of the strongest remaining edge, earliest id on ties.
    std::size_t best = graph.edges.size();
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      if (done[e]) continue;
      if (best == graph.edges.size() ||
          strength(graph.edges[e].weight) > strength(graph.edges[best].weight)) {
        best = e;
      }
    }
    done[best] = true;
    const SignedEdge& edge = graph.edges[best];
    if (edge.weight == 0.0) continue;
    const std::size_t ci = component[edge.i], cj = component[edge.j];
    if (ci == cj) continue;
    if (edge.sign == EdgeSign::Attractive) {
      bool blocked = false;
      for (const auto& [u, v] : mutex_pairs) {
        if ((component[u] == ci && component[v] == cj) || (component[u] == cj && component[v] == ci)) {
          blocked = true;
        }
      }
      if (blocked) continue;
      for (std::size_t v = 0; v < n; ++v) {
        if (component[v] == cj) component[v] = ci;
      }
      partition.active_attractive.push_back(best);
    } else {
      mutex_pairs.emplace_back(edge.i, edge.j);
      partition.active_repulsive.push_back(best);
    }
  }
  // Number components by their lowest node.
  std::vector<std::size_t> name(n, n);
  std::uint32_t next = 0;
  partition.labels.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (name[component[v]] == n) name[component[v]] = next++;
    partition.labels[v] = static_cast<std::uint32_t>(name[component[v]]);
  }
  partition.component_count = next;
  return partition;
}

}  // namespace sgseg
