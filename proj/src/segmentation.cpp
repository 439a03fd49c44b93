#include "sgseg/segmentation.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "sgseg/error.hpp"

namespace sgseg {

CellSegmentation CellSegmentation::from_assignment(std::vector<CellId> assignment) {
  CellSegmentation seg;
  // Dense renumbering in order of each cell's first molecule.
  CellId next = 0;
  std::map<CellId, CellId> order;
  for (CellId c : assignment) {
    if (c < kUnassigned) throw Error(ErrorCode::InvalidArgument, "cell ids must be >= -1");
    if (c != kUnassigned && order.try_emplace(c, next).second) ++next;
  }
  seg.cells_.resize(static_cast<std::size_t>(next));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == kUnassigned) continue;
    const CellId d = order.at(assignment[i]);
    assignment[i] = d;
    seg.cells_[static_cast<std::size_t>(d)].push_back(static_cast<MoleculeId>(i));
  }
  seg.assignment_ = std::move(assignment);
  return seg;
}

std::size_t CellSegmentation::assigned_count() const {
  std::size_t total = 0;
  for (const auto& c : cells_) total += c.size();
  return total;
}

void write_assignments(std::ostream& out, const MoleculeTable& table, const CellSegmentation& seg) {
  if (seg.molecule_count() != table.size()) {
    throw Error(ErrorCode::AlignmentError, "segmentation and table sizes differ");
  }
  out << (table.dims() == 3 ? "molecule_id,x,y,z,gene,cell_id\n" : "molecule_id,x,y,gene,cell_id\n");
  for (MoleculeId i = 0; i < table.size(); ++i) {
    out << i;
    for (double c : table.position(i)) out << ',' << format_double(c);
    out << ',' << table.panel().name(table.label(i)) << ',' << seg.cell_of(i) << '\n';
  }
}

AssignmentFile read_assignments(std::istream& in) {
  DelimitedReader reader(in);
  auto id_col = reader.column("molecule_id");
  auto cell_col = reader.column("cell_id");
  if (!id_col) throw Error(ErrorCode::MissingColumn, "missing column: molecule_id");
  if (!cell_col) throw Error(ErrorCode::MissingColumn, "missing column: cell_id");
  auto x_col = reader.column("x"), y_col = reader.column("y"), z_col = reader.column("z");
  auto gene_col = reader.column("gene");
  const bool spatial = x_col && y_col && gene_col;
  const int dims = spatial && z_col ? 3 : 2;

  AssignmentFile file;
  std::vector<CellId> cells;
  GenePanel panel;
  std::vector<double> coords;
  std::vector<GeneIndex> labels;
  std::vector<std::string> f;
  while (reader.next(f)) {
    auto field = [&](std::size_t c) -> const std::string& {
      if (c >= f.size()) throw UnparsableRow(reader.row(), "too few fields");
      return f[c];
    };
    auto id = parse_int(field(*id_col));
    auto cell = parse_int(field(*cell_col));
    if (!id || !cell) throw UnparsableRow(reader.row(), "non-integer molecule_id or cell_id");
    file.molecule_ids.push_back(*id);
    cells.push_back(static_cast<CellId>(*cell));
    if (spatial) {
      for (auto col : {x_col, y_col, dims == 3 ? z_col : std::nullopt}) {
        if (!col) continue;
        auto v = parse_double(field(*col));
        if (!v) throw UnparsableRow(reader.row(), "non-numeric coordinate");
        coords.push_back(*v);
      }
      labels.push_back(panel.intern(field(*gene_col)));
    }
  }
  if (cells.empty()) throw Error(ErrorCode::EmptyFile, "assignment file has no rows");
  if (spatial) {
    file.table = MoleculeTable(dims, std::move(panel));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      file.table.add(std::span<const double>(coords.data() + i * dims, static_cast<std::size_t>(dims)),
                     labels[i]);
    }
  }
  file.segmentation = CellSegmentation::from_assignment(std::move(cells));
  return file;
}

AssignmentFile read_assignments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_assignments(in);
}

}  // namespace sgseg
