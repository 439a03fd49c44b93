#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sgseg/molecule_table.hpp"
#include "sgseg/segmentation.hpp"

namespace sgseg {

struct SynthConfig {
  std::size_t cells = 200;
  std::size_t molecules_per_cell = 100;
  std::size_t types = 6;
  std::size_t genes = 32;
  double r_cell = 8.0;
  /// Fraction of all output rows that are uniform background molecules.
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  MoleculeTable table;
  CellSegmentation truth;  // background rows are unassigned
  std::vector<std::array<double, 2>> centers;
  std::vector<std::size_t> cell_types;
  std::vector<std::vector<double>> profiles;  // per type, sums to 1
};

/// Ground-truth point clouds: cell centres on a grid of pitch 4 R_cell,
/// jittered by up to R_cell / 2 per axis (so centres stay >= 3 R_cell apart);
/// molecules ~ N(centre, (R_cell / 2)^2 I); genes drawn from the cell
/// type's profile, which puts 80% of its mass on a type-specific quarter of
/// the panel. Rows are shuffled.
SynthResult synthesize(const SynthConfig& config);

}  // namespace sgseg
