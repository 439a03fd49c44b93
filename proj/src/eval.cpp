#include "sgseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "sgseg/error.hpp"

namespace sgseg {

double dice_index(std::span<const MoleculeId> a, std::span<const MoleculeId> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySet, "dice index of an empty set");
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  return 2.0 * static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

std::vector<int> max_weight_assignment(const Eigen::MatrixXd& weights) {
  const auto rows = static_cast<int>(weights.rows());
  const auto cols = static_cast<int>(weights.cols());
  const int n = std::max(rows, cols);
  std::vector<int> result(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return result;

  // Minimise cost = -weight on the zero-padded square matrix. Arrays are
  // 1-based; column 0 is the virtual start of each augmenting search.
  auto cost = [&](int i, int j) {
    return (i <= rows && j <= cols) ? -weights(i - 1, j - 1) : 0.0;
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), min_slack(n + 1);
  std::vector<int> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    int j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = row_of_col[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = cost(i0, j) - u[i0] - v[j];
        if (reduced < min_slack[j]) {
          min_slack[j] = reduced;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const int j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= cols; ++j) {
    const int i = row_of_col[j];
    if (i >= 1 && i <= rows) result[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  return result;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

}  // namespace

MatchResult match_cells(const CellSegmentation& a, const CellSegmentation& b) {
  if (a.molecule_count() != b.molecule_count()) {
    throw Error(ErrorCode::AlignmentError, "segmentations cover different molecule counts");
  }
  const std::size_t na = a.cell_count(), nb = b.cell_count();

  std::map<std::pair<CellId, CellId>, std::size_t> overlap;
  for (std::size_t m = 0; m < a.molecule_count(); ++m) {
    const CellId ca = a.assignment()[m], cb = b.assignment()[m];
    if (ca != kUnassigned && cb != kUnassigned) ++overlap[{ca, cb}];
  }

  // Nodes 0..na-1 are cells of A, na..na+nb-1 cells of B.
  DisjointSets sets(na + nb);
  for (const auto& [key, count] : overlap) sets.unite(key.first, na + key.second);
  std::map<std::size_t, std::pair<std::vector<CellId>, std::vector<CellId>>> groups;
  for (const auto& [key, count] : overlap) {
    (void)count;
    groups.try_emplace(sets.find(key.first));
  }
  for (std::size_t c = 0; c < na; ++c) {
    auto it = groups.find(sets.find(c));
    if (it != groups.end()) it->second.first.push_back(static_cast<CellId>(c));
  }
  for (std::size_t c = 0; c < nb; ++c) {
    auto it = groups.find(sets.find(na + c));
    if (it != groups.end()) it->second.second.push_back(static_cast<CellId>(c));
  }

  MatchResult result;
  std::vector<bool> used_a(na, false), used_b(nb, false);
  for (const auto& [root, members] : groups) {
    (void)root;
    const auto& [rows, cols] = members;
    Eigen::MatrixXd dice = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                                 static_cast<Eigen::Index>(cols.size()));
    std::unordered_map<CellId, Eigen::Index> col_index;
    for (std::size_t c = 0; c < cols.size(); ++c) col_index[cols[c]] = static_cast<Eigen::Index>(c);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double size_a = static_cast<double>(a.cells()[rows[r]].size());
      for (auto it = overlap.lower_bound({rows[r], std::numeric_limits<CellId>::min()});
           it != overlap.end() && it->first.first == rows[r]; ++it) {
        const double size_b = static_cast<double>(b.cells()[it->first.second].size());
        dice(static_cast<Eigen::Index>(r), col_index.at(it->first.second)) =
            2.0 * static_cast<double>(it->second) / (size_a + size_b);
      }
    }
    const auto assignment = max_weight_assignment(dice);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int c = assignment[r];
      if (c < 0) continue;
      const double d = dice(static_cast<Eigen::Index>(r), c);
      if (d <= 0.0) continue;
      result.pairs.push_back({rows[r], cols[static_cast<std::size_t>(c)], d});
      used_a[static_cast<std::size_t>(rows[r])] = true;
      used_b[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])] = true;
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const MatchedPair& x, const MatchedPair& y) { return x.a < y.a; });
  for (std::size_t c = 0; c < na; ++c) {
    if (!used_a[c]) result.unmatched_a.push_back(static_cast<CellId>(c));
  }
  for (std::size_t c = 0; c < nb; ++c) {
    if (!used_b[c]) result.unmatched_b.push_back(static_cast<CellId>(c));
  }
  if (!result.pairs.empty()) {
    std::vector<double> values;
    for (const auto& p : result.pairs) {
      values.push_back(p.dice);
      result.total_dice += p.dice;
    }
    result.mean_dice = result.total_dice / static_cast<double>(values.size());
    result.median_dice = median_of(std::move(values));
  }
  return result;
}

SummaryMetrics summary_metrics(const CellSegmentation& seg, std::size_t total_molecules) {
  SummaryMetrics m;
  m.cell_count = seg.cell_count();
  m.assigned = seg.assigned_count();
  if (total_molecules < m.assigned) {
    throw Error(ErrorCode::InvalidArgument, "total molecule count below assigned count");
  }
  m.assigned_fraction =
      total_molecules == 0 ? 0.0 : static_cast<double>(m.assigned) / static_cast<double>(total_molecules);
  std::map<std::size_t, std::size_t> sizes;
  for (const auto& cell : seg.cells()) ++sizes[cell.size()];
  m.size_histogram.assign(sizes.begin(), sizes.end());
  return m;
}

std::vector<std::size_t> dice_histogram(const MatchResult& match, double bin_width) {
  const auto bins = static_cast<std::size_t>(std::llround(1.0 / bin_width));
  std::vector<std::size_t> counts(bins, 0);
  for (const auto& p : match.pairs) {
    auto bin = static_cast<std::size_t>(std::floor(p.dice / bin_width + 1e-9));
    ++counts[std::min(bin, bins - 1)];
  }
  return counts;
}

nlohmann::json to_json(const MatchResult& match) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : match.pairs) pairs.push_back({{"a", p.a}, {"b", p.b}, {"dice", p.dice}});
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {
      {"matched", match.pairs.size()},
      {"median_dice", opt(match.median_dice)},
      {"mean_dice", opt(match.mean_dice)},
      {"total_dice", match.total_dice},
      {"unmatched_a", match.unmatched_a},
      {"unmatched_b", match.unmatched_b},
      {"dice_histogram", {{"bin_width", 0.05}, {"counts", dice_histogram(match)}}},
      {"pairs", pairs},
  };
}

nlohmann::json to_json(const SummaryMetrics& metrics) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [size, count] : metrics.size_histogram) hist.push_back({size, count});
  return {{"cell_count", metrics.cell_count},
          {"assigned", metrics.assigned},
          {"assigned_fraction", metrics.assigned_fraction},
          {"size_histogram", hist}};
}

void write_matched_pairs(std::ostream& out, const MatchResult& match) {
  out << "cell_a,cell_b,dice\n";
  for (const auto& p : match.pairs) out << p.a << ',' << p.b << ',' << format_double(p.dice) << '\n';
}

}  // namespace sgseg
