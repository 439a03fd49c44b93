#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgseg/molecule_table.hpp"
#include "sgseg/spatial_index.hpp"

namespace sgseg {

/// Dense n x |panel| matrix of neighbourhood label counts, row-major.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, std::size_t k_used)
      : rows_(rows), cols_(cols), k_used_(k_used), values_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t k_used() const { return k_used_; }

  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t k_used_ = 0;
  std::vector<double> values_;
};

std::vector<double> one_hot(const std::string& label, const GenePanel& panel);

struct FeatureOptions {
  std::size_t k = 35;
  /// When set, each neighbour contributes exp(-d^2 / (2 sigma^2)) instead of 1.
  std::optional<double> gaussian_bandwidth;
  SelfPolicy self = SelfPolicy::Include;
};

/// Sum of the one-hot labels over each molecule's k nearest neighbours.
FeatureMatrix compositional_features(const MoleculeTable& table, const SpatialIndex& index,
                                     const FeatureOptions& options);

/// min(|x_i|_1, |x_j|_1).
double density_factor(std::span<const double> x_i, std::span<const double> x_j);

/// round(expected molecules per cell / 3), at least 1.
std::size_t default_k(double expected_molecules_per_cell);

void write_features(std::ostream& out, const FeatureMatrix& features, const GenePanel& panel);

}  // namespace sgseg
