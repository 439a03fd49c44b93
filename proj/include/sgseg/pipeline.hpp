#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sgseg/features.hpp"
#include "sgseg/gmm.hpp"
#include "sgseg/graph.hpp"
#include "sgseg/molecule_table.hpp"
#include "sgseg/mutex_watershed.hpp"
#include "sgseg/pairnet.hpp"
#include "sgseg/segmentation.hpp"
#include "sgseg/spatial_index.hpp"

namespace sgseg {

struct PipelineConfig {
  double r_cell = 8.0;
  /// Feature neighbourhood size; when unset it is derived from expected_per_cell.
  std::optional<std::size_t> k;
  std::optional<double> expected_per_cell;
  std::size_t n_min = 30;
  std::uint64_t seed = 0;

  bool prefilter = true;
  std::size_t prefilter_rank = 15;

  std::optional<double> gaussian_bandwidth;
  SelfPolicy feature_self = SelfPolicy::Include;

  std::size_t hidden = 64;
  std::size_t latent = 16;
  /// r_cell and seed are taken from the fields above.
  TrainConfig train;

  std::size_t attractive_neighbors = 5;
  std::size_t repulsive_per_node = 15;

  /// Molecules (ids in the input table) that must end in pairwise different
  /// cells, e.g. one marker per nucleus. Prefiltered markers are ignored.
  std::vector<MoleculeId> exclusive_markers;

  void validate() const;
  std::size_t resolved_k() const;
  nlohmann::json to_json() const;
};

struct PrefilterResult {
  std::vector<bool> keep;
  std::vector<double> rank_distance;  // distance to the rank-th other molecule
  Gmm1D mixture;
  std::size_t removed = 0;
};

/// Drops molecules whose rank-th neighbour distance is better explained by
/// the larger-mean mixture component (responsibility > 0.5).
PrefilterResult prefilter_extracellular(const MoleculeTable& table, const SpatialIndex& index,
                                        std::size_t rank = 15);

/// Components with fewer than n_min members become unassigned; the rest are
/// renumbered densely in order of their lowest molecule id.
CellSegmentation postfilter_small_cells(const Partition& partition, std::size_t n_min);

struct StageTiming {
  std::string stage;
  double seconds;
};

struct RunReport {
  std::size_t molecules = 0;
  std::size_t prefiltered = 0;
  std::size_t k_used = 0;
  std::vector<double> loss_history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::size_t attractive_edges = 0;
  std::size_t repulsive_edges = 0;
  std::size_t infinite_edges = 0;
  std::size_t sign_conflicts = 0;
  std::size_t components = 0;
  std::size_t cell_count = 0;
  double assigned_fraction = 0.0;
  std::optional<Gmm1D> prefilter_mixture;
  std::vector<StageTiming> timings;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

/// Intermediate products kept when requested; indices refer to the kept
/// (post-prefilter) molecules, mapped back through `kept_ids`.
struct PipelineArtifacts {
  std::vector<MoleculeId> kept_ids;
  MoleculeTable kept_table;
  FeatureMatrix features;
  PairNet net;
  std::vector<NodePair> attractive;
  std::vector<RepulsivePair> repulsive;
  SignedGraph graph;
  Partition partition;
};

struct SegmentResult {
  CellSegmentation segmentation;
  RunReport report;
  std::optional<PipelineArtifacts> artifacts;
};

/// prefilter -> features -> training -> graph -> mutex watershed -> postfilter.
/// Errors are rethrown with Error::stage() naming the failing stage.
SegmentResult segment(const MoleculeTable& table, const PipelineConfig& config,
                      bool keep_artifacts = false);

}  // namespace sgseg
