#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sgseg/molecule_table.hpp"

namespace sgseg {

using CellId = std::int32_t;
inline constexpr CellId kUnassigned = -1;

/// Per-molecule cell ids plus the inverse map. Cell ids are dense from 0.
class CellSegmentation {
 public:
  CellSegmentation() = default;
  /// Builds the cell map from an assignment vector; ids need not be dense
  /// but must be >= 0 or kUnassigned.
  static CellSegmentation from_assignment(std::vector<CellId> assignment);

  const std::vector<CellId>& assignment() const { return assignment_; }
  CellId cell_of(MoleculeId id) const { return assignment_[id]; }
  /// Molecule ids of each cell, ascending.
  const std::vector<std::vector<MoleculeId>>& cells() const { return cells_; }

  std::size_t molecule_count() const { return assignment_.size(); }
  std::size_t cell_count() const { return cells_.size(); }
  std::size_t assigned_count() const;

  bool operator==(const CellSegmentation&) const = default;

 private:
  std::vector<CellId> assignment_;
  std::vector<std::vector<MoleculeId>> cells_;
};

/// molecule_id,x,y[,z],gene,cell_id; unassigned written as -1.
void write_assignments(std::ostream& out, const MoleculeTable& table, const CellSegmentation& seg);

struct AssignmentFile {
  std::vector<std::int64_t> molecule_ids;  // as written, in row order
  MoleculeTable table;                     // empty when the file has no x/y/gene columns
  CellSegmentation segmentation;           // indexed by row
};

AssignmentFile read_assignments(std::istream& in);
AssignmentFile read_assignments(const std::filesystem::path& path);

}  // namespace sgseg
