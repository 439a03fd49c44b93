#include "sgseg/features.hpp"

#include <cmath>
#include <ostream>

#include "sgseg/error.hpp"

namespace sgseg {

std::vector<double> one_hot(const std::string& label, const GenePanel& panel) {
  auto index = panel.find(label);
  if (!index) throw Error(ErrorCode::UnknownLabel, "label not in gene panel: " + label);
  std::vector<double> e(panel.size(), 0.0);
  e[*index] = 1.0;
  return e;
}

FeatureMatrix compositional_features(const MoleculeTable& table, const SpatialIndex& index,
                                     const FeatureOptions& options) {
  if (options.gaussian_bandwidth && !(*options.gaussian_bandwidth > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "gaussian bandwidth must be > 0");
  }
  const std::size_t n = table.size();
  const std::size_t available = options.self == SelfPolicy::Include ? n : n - 1;
  if (options.k == 0 || options.k > available) {
    throw Error(ErrorCode::KTooLarge, "feature k = " + std::to_string(options.k) +
                                          " exceeds the " + std::to_string(available) +
                                          " available neighbours");
  }
  FeatureMatrix features(n, table.panel().size(), options.k);
  const double inv_two_var =
      options.gaussian_bandwidth
          ? 1.0 / (2.0 * *options.gaussian_bandwidth * *options.gaussian_bandwidth)
          : 0.0;
  for (MoleculeId i = 0; i < n; ++i) {
    auto row = features.row(i);
    for (const Neighbor& nb : index.knn_of(i, options.k, options.self)) {
      const double w = options.gaussian_bandwidth
                           ? std::exp(-nb.distance * nb.distance * inv_two_var)
                           : 1.0;
      row[table.label(nb.id)] += w;
    }
  }
  return features;
}

double density_factor(std::span<const double> x_i, std::span<const double> x_j) {
  double a = 0.0, b = 0.0;
  for (double v : x_i) a += std::abs(v);
  for (double v : x_j) b += std::abs(v);
  return std::min(a, b);
}

std::size_t default_k(double expected_molecules_per_cell) {
  if (!(expected_molecules_per_cell > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "expected molecules per cell must be > 0");
  }
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(expected_molecules_per_cell / 3.0)));
}

void write_features(std::ostream& out, const FeatureMatrix& features, const GenePanel& panel) {
  out << "molecule_id";
  for (const auto& name : panel.names()) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < features.rows(); ++i) {
    out << i;
    for (double v : features.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace sgseg
