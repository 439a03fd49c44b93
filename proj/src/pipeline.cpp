#include "sgseg/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <unordered_map>

#include "sgseg/error.hpp"
#include "sgseg/log.hpp"

namespace sgseg {

void PipelineConfig::validate() const {
  if (!(r_cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "R_cell must be > 0");
  if (n_min == 0) throw Error(ErrorCode::InvalidArgument, "n_min must be >= 1");
  if (k && *k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (!k && !expected_per_cell) {
    throw Error(ErrorCode::InvalidArgument,
                "either k or the expected molecule count per cell must be given");
  }
  if (gaussian_bandwidth && !(*gaussian_bandwidth > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "gaussian bandwidth must be > 0");
  }
  if (hidden == 0 || latent == 0) throw Error(ErrorCode::InvalidArgument, "network widths must be >= 1");
}

std::size_t PipelineConfig::resolved_k() const { return k ? *k : default_k(*expected_per_cell); }

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j = {
      {"r_cell", r_cell},
      {"k", k ? nlohmann::json(*k) : nlohmann::json(nullptr)},
      {"expected_per_cell",
       expected_per_cell ? nlohmann::json(*expected_per_cell) : nlohmann::json(nullptr)},
      {"n_min", n_min},
      {"seed", seed},
      {"prefilter", prefilter},
      {"prefilter_rank", prefilter_rank},
      {"gaussian_bandwidth",
       gaussian_bandwidth ? nlohmann::json(*gaussian_bandwidth) : nlohmann::json(nullptr)},
      {"feature_includes_self", feature_self == SelfPolicy::Include},
      {"hidden", hidden},
      {"latent", latent},
      {"attractive_neighbors", attractive_neighbors},
      {"repulsive_per_node", repulsive_per_node},
      {"exclusive_markers", exclusive_markers.size()},
      {"train",
       {{"max_epochs", train.max_epochs},
        {"patience", train.patience},
        {"early_stopping", train.early_stopping},
        {"batch_size", train.batch_size},
        {"learning_rate", train.learning_rate},
        {"beta1", train.beta1},
        {"beta2", train.beta2},
        {"epsilon", train.epsilon},
        {"pairs_per_epoch", train.pairs_per_epoch}}},
  };
  return j;
}

PrefilterResult prefilter_extracellular(const MoleculeTable& table, const SpatialIndex& index,
                                        std::size_t rank) {
  if (rank == 0 || table.size() <= rank) {
    throw Error(ErrorCode::TooFewMolecules, "prefilter needs more than " + std::to_string(rank) +
                                                " molecules, got " + std::to_string(table.size()));
  }
  PrefilterResult result;
  result.rank_distance.resize(table.size());
  for (MoleculeId i = 0; i < table.size(); ++i) {
    result.rank_distance[i] = index.knn_of(i, rank, SelfPolicy::Exclude).back().distance;
  }
  result.mixture = gmm_fit_1d(result.rank_distance);
  result.keep.resize(table.size());
  for (MoleculeId i = 0; i < table.size(); ++i) {
    result.keep[i] = !(result.mixture.responsibility_high(result.rank_distance[i]) > 0.5);
    if (!result.keep[i]) ++result.removed;
  }
  return result;
}

CellSegmentation postfilter_small_cells(const Partition& partition, std::size_t n_min) {
  std::vector<std::size_t> sizes(partition.component_count, 0);
  for (std::uint32_t label : partition.labels) ++sizes[label];
  std::vector<CellId> assignment(partition.labels.size(), kUnassigned);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const std::uint32_t label = partition.labels[i];
    if (sizes[label] >= n_min) assignment[i] = static_cast<CellId>(label);
  }
  return CellSegmentation::from_assignment(std::move(assignment));
}

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <class F>
  auto run(const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record(stage, start);
      } else {
        auto value = body();
        record(stage, start);
        return value;
      }
    } catch (Error& e) {
      if (e.stage().empty()) e.set_stage(stage);
      throw;
    }
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    sink_.push_back({stage, elapsed.count()});
    log_info(stage + ": " + std::to_string(elapsed.count()) + " s");
  }

  std::vector<StageTiming>& sink_;
};

// Stage seeds are derived from the run seed so that every stage owns an
// independent stream.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
  return splitmix64(seed ^ splitmix64(stage));
}

}  // namespace

SegmentResult segment(const MoleculeTable& table, const PipelineConfig& config,
                      bool keep_artifacts) {
  SegmentResult result;
  RunReport& report = result.report;
  StageClock clock(report.timings);
  clock.run("config", [&] {
    config.validate();
    if (table.empty()) throw Error(ErrorCode::EmptyTable, "no molecules to segment");
  });
  report.molecules = table.size();
  report.config = config.to_json();

  std::vector<MoleculeId> kept_ids;
  if (config.prefilter) {
    clock.run("prefilter", [&] {
      const SpatialIndex full_index(table);
      auto pre = prefilter_extracellular(table, full_index, config.prefilter_rank);
      for (MoleculeId i = 0; i < table.size(); ++i) {
        if (pre.keep[i]) kept_ids.push_back(i);
      }
      report.prefiltered = pre.removed;
      report.prefilter_mixture = pre.mixture;
    });
  } else {
    kept_ids.resize(table.size());
    for (MoleculeId i = 0; i < table.size(); ++i) kept_ids[i] = i;
  }
  const MoleculeTable kept = table.subset(kept_ids);

  const std::size_t k = config.resolved_k();
  report.k_used = k;
  auto [index, features] = clock.run("features", [&] {
    if (kept.empty()) throw Error(ErrorCode::EmptyTable, "every molecule was prefiltered");
    SpatialIndex idx(kept);
    FeatureOptions options{k, config.gaussian_bandwidth, config.feature_self};
    FeatureMatrix f = compositional_features(kept, idx, options);
    return std::pair<SpatialIndex, FeatureMatrix>(std::move(idx), std::move(f));
  });

  TrainResult trained = clock.run("train", [&] {
    TrainConfig tc = config.train;
    tc.r_cell = config.r_cell;
    tc.seed = stage_seed(config.seed, 1);
    PairNet net = init_network(kept.panel().size(), config.hidden, config.latent,
                               stage_seed(config.seed, 2));
    return train(std::move(net), kept, index, features, tc);
  });
  report.loss_history = trained.loss_history;
  report.best_epoch = trained.best_epoch;
  report.stopped_early = trained.stopped_early;

  std::vector<NodePair> attractive;
  std::vector<RepulsivePair> repulsive;
  SignedGraph graph = clock.run("graph", [&] {
    attractive = attractive_edges(index, config.attractive_neighbors);
    RepulsiveOptions ro;
    ro.r_cell = config.r_cell;
    ro.per_node = config.repulsive_per_node;
    ro.seed = stage_seed(config.seed, 3);
    repulsive = repulsive_edges(index, ro);
    GraphBuildStats stats;
    SignedGraph g = weight_graph(trained.net, features, attractive, repulsive, &stats);
    report.sign_conflicts = stats.sign_conflicts_dropped;
    if (!config.exclusive_markers.empty()) {
      std::unordered_map<MoleculeId, MoleculeId> to_kept;
      for (MoleculeId i = 0; i < kept_ids.size(); ++i) to_kept.emplace(kept_ids[i], i);
      std::vector<MoleculeId> markers;
      for (MoleculeId m : config.exclusive_markers) {
        if (auto it = to_kept.find(m); it != to_kept.end()) markers.push_back(it->second);
      }
      add_exclusive_markers(g, markers);
    }
    return g;
  });
  report.attractive_edges = graph.count(EdgeSign::Attractive);
  report.repulsive_edges = graph.count(EdgeSign::Repulsive);
  for (const auto& e : graph.edges) {
    if (e.sign == EdgeSign::Repulsive && std::isinf(e.weight)) ++report.infinite_edges;
  }

  Partition partition = clock.run("partition", [&] { return mutex_watershed(graph); });
  report.components = partition.component_count;

  CellSegmentation kept_seg = clock.run("postfilter", [&] {
    return postfilter_small_cells(partition, config.n_min);
  });
  std::vector<CellId> assignment(table.size(), kUnassigned);
  for (MoleculeId i = 0; i < kept_ids.size(); ++i) assignment[kept_ids[i]] = kept_seg.cell_of(i);
  result.segmentation = CellSegmentation::from_assignment(std::move(assignment));
  report.cell_count = result.segmentation.cell_count();
  report.assigned_fraction = static_cast<double>(result.segmentation.assigned_count()) /
                             static_cast<double>(table.size());

  if (keep_artifacts) {
    result.artifacts = PipelineArtifacts{std::move(kept_ids), kept,
                                         std::move(features), std::move(trained.net),
                                         std::move(attractive), std::move(repulsive),
                                         std::move(graph), std::move(partition)};
  }
  return result;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json timing = nlohmann::json::array();
  for (const auto& t : timings) timing.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  nlohmann::json j = {
      {"molecules", molecules},
      {"prefiltered", prefiltered},
      {"k_used", k_used},
      {"cell_count", cell_count},
      {"assigned_fraction", assigned_fraction},
      {"components_before_postfilter", components},
      {"loss_history", loss_history},
      {"best_epoch", best_epoch},
      {"stopped_early", stopped_early},
      {"edges",
       {{"attractive", attractive_edges},
        {"repulsive", repulsive_edges},
        {"repulsive_infinite", infinite_edges},
        {"sign_conflicts_dropped", sign_conflicts}}},
      {"timings", timing},
      {"config", config},
  };
  if (prefilter_mixture) {
    auto comp = [](const GaussianComponent& c) {
      return nlohmann::json{{"mean", c.mean}, {"variance", c.variance}, {"weight", c.weight}};
    };
    j["prefilter_mixture"] = {{"low", comp(prefilter_mixture->low)},
                              {"high", comp(prefilter_mixture->high)},
                              {"iterations", prefilter_mixture->iterations}};
  } else {
    j["prefilter_mixture"] = nullptr;
  }
  return j;
}

}  // namespace sgseg
