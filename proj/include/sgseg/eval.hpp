#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "sgseg/segmentation.hpp"

namespace sgseg {

/// 2|a ∩ b| / (|a| + |b|) for sorted, duplicate-free id lists.
double dice_index(std::span<const MoleculeId> a, std::span<const MoleculeId> b);

/// Maximum-total-weight one-to-one assignment of rows to columns, for any
/// rectangular shape. The matrix is padded to square with zero entries and
/// solved with the O(n^3) Hungarian method. Returns, per row, the column
/// index or -1 when the row got a padding column.
std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weights);

struct MatchedPair {
  CellId a, b;
  double dice;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;  // sorted by a
  std::vector<CellId> unmatched_a;
  std::vector<CellId> unmatched_b;
  std::optional<double> median_dice;
  std::optional<double> mean_dice;
  double total_dice = 0.0;
};

/// Pairs cells of two segmentations of the same molecules so that the total
/// (hence average) Dice is maximal. Only overlapping cell pairs are scored;
/// the overlap graph is split into connected components that are solved
/// independently. Zero-Dice assignments are reported as unmatched.
MatchResult match_cells(const CellSegmentation& a, const CellSegmentation& b);

struct SummaryMetrics {
  std::size_t cell_count = 0;
  std::size_t assigned = 0;
  double assigned_fraction = 0.0;
  /// (cell size, number of cells of that size), ascending by size.
  std::vector<std::pair<std::size_t, std::size_t>> size_histogram;
};

SummaryMetrics summary_metrics(const CellSegmentation& seg, std::size_t total_molecules);

/// Counts of values in [0, 0.05), [0.05, 0.10), ..., [0.95, 1.0].
std::vector<std::size_t> dice_histogram(const MatchResult& match, double bin_width = 0.05);

nlohmann::json to_json(const MatchResult& match);
nlohmann::json to_json(const SummaryMetrics& metrics);
void write_matched_pairs(std::ostream& out, const MatchResult& match);

}  // namespace sgseg
