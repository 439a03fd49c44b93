#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace sgseg {

using MoleculeId = std::uint32_t;
using GeneIndex = std::uint32_t;

/// Ordered set of distinct gene names. The index of a name is its one-hot
/// position and never changes once assigned.
class GenePanel {
 public:
  GenePanel() = default;
  explicit GenePanel(std::vector<std::string> names);

  /// Returns the existing index or appends the name.
  GeneIndex intern(const std::string& name);
  std::optional<GeneIndex> find(const std::string& name) const;

  const std::string& name(GeneIndex index) const { return names_.at(index); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  bool operator==(const GenePanel& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, GeneIndex> index_;
};

struct Molecule {
  MoleculeId id;
  std::span<const double> position;
  GeneIndex label;
};

/// Struct-of-arrays molecule storage; ids are row indices 0..n-1.
class MoleculeTable {
 public:
  MoleculeTable() = default;
  MoleculeTable(int dims, GenePanel panel);

  void add(std::span<const double> position, GeneIndex label);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  int dims() const { return dims_; }
  const GenePanel& panel() const { return panel_; }

  std::span<const double> position(MoleculeId id) const {
    return {coords_.data() + static_cast<std::size_t>(id) * dims_,
            static_cast<std::size_t>(dims_)};
  }
  GeneIndex label(MoleculeId id) const { return labels_[id]; }
  Molecule molecule(MoleculeId id) const { return {id, position(id), labels_[id]}; }

  const std::vector<double>& coords() const { return coords_; }
  const std::vector<GeneIndex>& labels() const { return labels_; }

  /// Table holding the given rows (renumbered in the given order), same panel.
  MoleculeTable subset(std::span<const MoleculeId> ids) const;

 private:
  int dims_ = 2;
  GenePanel panel_;
  std::vector<double> coords_;
  std::vector<GeneIndex> labels_;
};

double distance(std::span<const double> a, std::span<const double> b);

struct ColumnMap {
  std::string x = "x";
  std::string y = "y";
  std::optional<std::string> z;
  std::string gene = "gene";
};

/// Splits delimited text with a header row. Fields are trimmed and a single
/// pair of surrounding double quotes is removed.
class DelimitedReader {
 public:
  /// With no delimiter given, the header decides among ',', '\t' and ';'.
  explicit DelimitedReader(std::istream& in, std::optional<char> delimiter = std::nullopt);

  const std::vector<std::string>& header() const { return header_; }
  char delimiter() const { return delimiter_; }
  std::optional<std::size_t> column(std::string_view name) const;

  /// Reads the next non-blank row; false at end of input.
  bool next(std::vector<std::string>& fields);
  /// 1-based index of the row last returned by next().
  std::size_t row() const { return row_; }

 private:
  std::istream& in_;
  char delimiter_ = ',';
  std::vector<std::string> header_;
  std::size_t row_ = 0;
  std::string line_;
};

std::vector<std::string> split_fields(std::string_view line, char delimiter);
char detect_delimiter(std::string_view header_line);
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

MoleculeTable load_molecules(std::istream& in, const ColumnMap& columns = {},
                             std::optional<char> delimiter = std::nullopt);
MoleculeTable load_molecules(const std::filesystem::path& path,
                             const ColumnMap& columns = {},
                             std::optional<char> delimiter = std::nullopt);

/// Writes x,y[,z],gene with a header; the inverse of load_molecules.
void write_molecules(std::ostream& out, const MoleculeTable& table);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace sgseg
