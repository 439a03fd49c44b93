#include "sgseg/mutex_watershed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "sgseg/error.hpp"

namespace sgseg {

ConstrainedUnionFind::ConstrainedUnionFind(std::size_t n)
    : parent_(n), rank_(n, 0), mutex_(n) {
  std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
}

std::uint32_t ConstrainedUnionFind::find(std::uint32_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool ConstrainedUnionFind::constrained(std::uint32_t a, std::uint32_t b) {
  const std::uint32_t ra = find(a), rb = find(b);
  if (ra == rb) return false;
  return mutex_[ra].size() <= mutex_[rb].size() ? mutex_[ra].contains(rb) : mutex_[rb].contains(ra);
}

bool ConstrainedUnionFind::merge(std::uint32_t a, std::uint32_t b) {
  std::uint32_t keep = find(a), gone = find(b);
  if (keep == gone || constrained(keep, gone)) return false;
  // The root with the larger constraint set survives so that only the
  // smaller set has to be rewritten.
  if (mutex_[keep].size() < mutex_[gone].size() ||
      (mutex_[keep].size() == mutex_[gone].size() && rank_[keep] < rank_[gone])) {
    std::swap(keep, gone);
  }
  parent_[gone] = keep;
  if (rank_[keep] == rank_[gone]) ++rank_[keep];
  for (std::uint32_t other : mutex_[gone]) {
    auto& theirs = mutex_[other];
    theirs.erase(gone);
    theirs.insert(keep);
    mutex_[keep].insert(other);
  }
  mutex_[gone].clear();
  return true;
}

bool ConstrainedUnionFind::add_mutex(std::uint32_t a, std::uint32_t b) {
  const std::uint32_t ra = find(a), rb = find(b);
  if (ra == rb) return false;
  mutex_[ra].insert(rb);
  mutex_[rb].insert(ra);
  return true;
}

std::vector<std::uint32_t> canonical_labels(const std::vector<std::uint32_t>& labels) {
  std::vector<std::uint32_t> out(labels.size());
  std::vector<std::uint32_t> remap;
  constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= remap.size()) remap.resize(labels[i] + 1, kUnset);
    if (remap[labels[i]] == kUnset) remap[labels[i]] = next++;
    out[i] = remap[labels[i]];
  }
  return out;
}

namespace {

double priority(double w) { return std::isinf(w) ? std::numeric_limits<double>::infinity() : std::abs(w); }

void validate(const SignedGraph& graph) {
  for (const auto& e : graph.edges) {
    if (e.i >= graph.node_count || e.j >= graph.node_count || e.i == e.j) {
      throw Error(ErrorCode::InvalidArgument, "graph edge endpoint out of range or self loop");
    }
    if (std::isnan(e.weight)) throw Error(ErrorCode::InvalidArgument, "graph edge weight is NaN");
  }
}

std::size_t count_components(const std::vector<std::uint32_t>& labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

}  // namespace

Partition mutex_watershed(const SignedGraph& graph, std::vector<std::size_t>* order) {
  validate(graph);
  std::vector<std::size_t> ids(graph.edges.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::vector<double> prio(graph.edges.size());
  for (std::size_t e = 0; e < ids.size(); ++e) prio[e] = priority(graph.edges[e].weight);
  std::sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    return prio[a] > prio[b] || (prio[a] == prio[b] && a < b);
  });

  ConstrainedUnionFind uf(graph.node_count);
  Partition partition;
  if (order) order->clear();
  for (std::size_t e : ids) {
    const SignedEdge& edge = graph.edges[e];
    if (edge.weight == 0.0) continue;
    if (order) order->push_back(e);
    if (edge.sign == EdgeSign::Attractive) {
      if (uf.merge(edge.i, edge.j)) partition.active_attractive.push_back(e);
    } else if (uf.add_mutex(edge.i, edge.j)) {
      partition.active_repulsive.push_back(e);
    }
  }
  std::vector<std::uint32_t> roots(graph.node_count);
  for (std::uint32_t v = 0; v < graph.node_count; ++v) roots[v] = uf.find(v);
  partition.labels = canonical_labels(roots);
  partition.component_count = count_components(partition.labels);
  return partition;
}

std::vector<std::string> partition_violations(const SignedGraph& graph,
                                              const Partition& partition) {
  std::vector<std::string> problems;
  if (partition.labels.size() != graph.node_count) {
    problems.push_back("label count differs from node count");
    return problems;
  }
  for (std::uint32_t label : partition.labels) {
    if (label >= partition.component_count) {
      problems.push_back("label outside [0, component_count)");
      break;
    }
  }
  for (std::size_t e : partition.active_attractive) {
    const auto& edge = graph.edges[e];
    if (partition.labels[edge.i] != partition.labels[edge.j]) {
      problems.push_back("active attractive edge " + std::to_string(e) + " spans two components");
    }
  }
  for (std::size_t e : partition.active_repulsive) {
    const auto& edge = graph.edges[e];
    if (partition.labels[edge.i] == partition.labels[edge.j]) {
      problems.push_back("mutex edge " + std::to_string(e) + " lies inside one component");
    }
  }
  // -inf edges are always processed first and so can never end inside a component.
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    if (edge.sign == EdgeSign::Repulsive && std::isinf(edge.weight) &&
        partition.labels[edge.i] == partition.labels[edge.j]) {
      problems.push_back("infinite repulsive edge " + std::to_string(e) + " lies inside one component");
    }
  }
  return problems;
}

void add_exclusive_markers(SignedGraph& graph, const std::vector<MoleculeId>& markers) {
  std::set<std::pair<MoleculeId, MoleculeId>> attractive;
  for (const auto& e : graph.edges) {
    if (e.sign == EdgeSign::Attractive) attractive.emplace(e.i, e.j);
  }
  for (std::size_t a = 0; a < markers.size(); ++a) {
    for (std::size_t b = a + 1; b < markers.size(); ++b) {
      const MoleculeId i = std::min(markers[a], markers[b]), j = std::max(markers[a], markers[b]);
      if (i == j || attractive.contains({i, j})) continue;
      if (j >= graph.node_count) throw Error(ErrorCode::InvalidArgument, "marker id out of range");
      graph.edges.push_back({i, j, EdgeSign::Repulsive, -std::numeric_limits<double>::infinity()});
    }
  }
}

}  // namespace sgseg
