#include "sgseg/molecule_table.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "sgseg/error.hpp"

namespace sgseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnparsableRow: return "UnparsableRow";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoEligiblePairs: return "NoEligiblePairs";
    case ErrorCode::TooFewMolecules: return "TooFewMolecules";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::Requires2D: return "Requires2D";
    case ErrorCode::CellNotInMask: return "CellNotInMask";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

GenePanel::GenePanel(std::vector<std::string> names) {
  for (auto& name : names) {
    if (find(name)) {
      throw Error(ErrorCode::InvalidArgument, "duplicate gene name in panel: " + name);
    }
    intern(name);
  }
}

GeneIndex GenePanel::intern(const std::string& name) {
  auto [it, inserted] = index_.try_emplace(name, static_cast<GeneIndex>(names_.size()));
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<GeneIndex> GenePanel::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

MoleculeTable::MoleculeTable(int dims, GenePanel panel) : dims_(dims), panel_(std::move(panel)) {
  if (dims != 2 && dims != 3) {
    throw Error(ErrorCode::DimensionMismatch, "molecule positions must be 2D or 3D");
  }
}

void MoleculeTable::add(std::span<const double> position, GeneIndex label) {
  if (position.size() != static_cast<std::size_t>(dims_)) {
    throw Error(ErrorCode::DimensionMismatch, "position has wrong dimension");
  }
  if (label >= panel_.size()) {
    throw Error(ErrorCode::UnknownLabel, "label index outside gene panel");
  }
  for (double c : position) {
    if (!std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "non-finite coordinate");
  }
  coords_.insert(coords_.end(), position.begin(), position.end());
  labels_.push_back(label);
}

MoleculeTable MoleculeTable::subset(std::span<const MoleculeId> ids) const {
  MoleculeTable out(dims_, panel_);
  out.coords_.reserve(ids.size() * dims_);
  out.labels_.reserve(ids.size());
  for (MoleculeId id : ids) {
    auto p = position(id);
    out.coords_.insert(out.coords_.end(), p.begin(), p.end());
    out.labels_.push_back(labels_[id]);
  }
  return out;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t' ||
                        s.front() == '\n'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\r' || s.back() == '\t' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

bool blank(std::string_view s) { return trim(s).empty(); }

}  // namespace

std::vector<std::string> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    std::string_view field =
        line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    field = trim(field);
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
      field = field.substr(1, field.size() - 2);
    }
    fields.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

char detect_delimiter(std::string_view header_line) {
  constexpr std::array<char, 3> candidates{',', '\t', ';'};
  char best = ',';
  long best_count = 0;
  for (char c : candidates) {
    const long count = std::count(header_line.begin(), header_line.end(), c);
    if (count > best_count) {
      best = c;
      best_count = count;
    }
  }
  return best;
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::optional<long long> parse_int(std::string_view text) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  if (std::isnan(value)) return "nan";
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

DelimitedReader::DelimitedReader(std::istream& in, std::optional<char> delimiter) : in_(in) {
  std::string header_line;
  while (std::getline(in_, header_line)) {
    if (!blank(header_line)) break;
  }
  if (blank(header_line)) throw Error(ErrorCode::EmptyFile, "input has no header row");
  if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    header_line.erase(0, 3);
  }
  delimiter_ = delimiter.value_or(detect_delimiter(header_line));
  header_ = split_fields(header_line, delimiter_);
}

std::optional<std::size_t> DelimitedReader::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

bool DelimitedReader::next(std::vector<std::string>& fields) {
  while (std::getline(in_, line_)) {
    if (blank(line_)) continue;
    ++row_;
    fields = split_fields(line_, delimiter_);
    return true;
  }
  return false;
}

MoleculeTable load_molecules(std::istream& in, const ColumnMap& columns,
                             std::optional<char> delimiter) {
  DelimitedReader reader(in, delimiter);
  auto require = [&](const std::string& name) {
    auto idx = reader.column(name);
    if (!idx) throw Error(ErrorCode::MissingColumn, "missing column: " + name);
    return *idx;
  };
  std::vector<std::size_t> coord_cols{require(columns.x), require(columns.y)};
  if (columns.z) coord_cols.push_back(require(*columns.z));
  const std::size_t gene_col = require(columns.gene);
  const std::size_t width = std::max(gene_col, *std::max_element(coord_cols.begin(), coord_cols.end())) + 1;

  GenePanel panel;
  std::vector<double> coords;
  std::vector<GeneIndex> labels;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() < width) throw UnparsableRow(reader.row(), "too few fields");
    for (std::size_t c : coord_cols) {
      auto v = parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw UnparsableRow(reader.row(), "non-numeric coordinate '" + fields[c] + "'");
      }
      coords.push_back(*v);
    }
    if (fields[gene_col].empty()) throw UnparsableRow(reader.row(), "empty gene field");
    labels.push_back(panel.intern(fields[gene_col]));
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyFile, "input has no data rows");

  MoleculeTable table(static_cast<int>(coord_cols.size()), std::move(panel));
  const std::size_t dims = coord_cols.size();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    table.add(std::span<const double>(coords.data() + i * dims, dims), labels[i]);
  }
  return table;
}

MoleculeTable load_molecules(const std::filesystem::path& path, const ColumnMap& columns,
                             std::optional<char> delimiter) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_molecules(in, columns, delimiter);
}

void write_molecules(std::ostream& out, const MoleculeTable& table) {
  out << (table.dims() == 3 ? "x,y,z,gene\n" : "x,y,gene\n");
  for (MoleculeId i = 0; i < table.size(); ++i) {
    for (double c : table.position(i)) out << format_double(c) << ',';
    out << table.panel().name(table.label(i)) << '\n';
  }
}

}  // namespace sgseg
