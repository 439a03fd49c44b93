// Command-line front end: segment, eval, contours and synth.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "sgseg/contours.hpp"
#include "sgseg/error.hpp"
#include "sgseg/eval.hpp"
#include "sgseg/log.hpp"
#include "sgseg/pipeline.hpp"
#include "sgseg/synth.hpp"

namespace fs = std::filesystem;
using namespace sgseg;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

void require_readable(const fs::path& path) {
  std::ifstream probe(path);
  if (!probe) throw Error(ErrorCode::Io, "cannot read " + path.string());
}

struct SegmentArgs {
  std::string input;
  std::string x_column = "x", y_column = "y", z_column, gene_column = "gene";
  double r_cell = 0.0;
  std::optional<std::size_t> k;
  std::optional<double> expected_per_cell;
  std::size_t n_min = 30;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool no_prefilter = false;
  std::optional<double> gaussian_features;
  std::size_t hidden = 64, latent = 16;
  std::size_t max_epochs = 300, patience = 15, pairs_per_epoch = 0;
  bool no_early_stopping = false;
  double learning_rate = 1e-3;
  std::string dump_features, dump_graph, save_model;
};

int run_segment(const SegmentArgs& a) {
  require_readable(a.input);
  ColumnMap columns{a.x_column, a.y_column, std::nullopt, a.gene_column};
  if (!a.z_column.empty()) columns.z = a.z_column;
  const MoleculeTable table = load_molecules(fs::path(a.input), columns);

  PipelineConfig config;
  config.r_cell = a.r_cell;
  config.k = a.k;
  config.expected_per_cell = a.expected_per_cell;
  if (!config.k && !config.expected_per_cell) config.k = FeatureOptions{}.k;
  config.n_min = a.n_min;
  config.seed = a.seed;
  config.prefilter = !a.no_prefilter;
  config.gaussian_bandwidth = a.gaussian_features;
  config.hidden = a.hidden;
  config.latent = a.latent;
  config.train.max_epochs = a.max_epochs;
  config.train.patience = a.patience;
  config.train.early_stopping = !a.no_early_stopping;
  config.train.pairs_per_epoch = a.pairs_per_epoch;
  config.train.learning_rate = a.learning_rate;

  const bool keep = !a.dump_features.empty() || !a.dump_graph.empty() || !a.save_model.empty();
  const SegmentResult result = segment(table, config, keep);

  const fs::path dir(a.out_dir);
  {
    auto out = open_output(dir / "assignments.csv");
    write_assignments(out, table, result.segmentation);
  }
  {
    auto out = open_output(dir / "report.json");
    out << result.report.to_json().dump(2) << '\n';
  }
  if (result.artifacts) {
    const auto& art = *result.artifacts;
    if (!a.dump_features.empty()) {
      auto out = open_output(a.dump_features);
      write_features(out, art.features, table.panel());
    }
    if (!a.dump_graph.empty()) {
      auto out = open_output(a.dump_graph);
      write_graph(out, art.graph);
    }
    if (!a.save_model.empty()) {
      TrainConfig tc = config.train;
      tc.r_cell = config.r_cell;
      tc.seed = config.seed;
      save_network(a.save_model, art.net, table.panel(), tc);
    }
  }
  std::cout << "cells: " << result.report.cell_count
            << "  assigned_fraction: " << format_double(result.report.assigned_fraction) << '\n';
  return 0;
}

struct EvalArgs {
  std::string a, b, out_dir;
};

/// Reorders `b` so its rows line up with the molecule ids of `a`.
CellSegmentation align_to(const AssignmentFile& a, const AssignmentFile& b) {
  if (a.molecule_ids.size() != b.molecule_ids.size()) {
    throw Error(ErrorCode::AlignmentError, "assignment files list different numbers of molecules");
  }
  if (a.molecule_ids == b.molecule_ids) return b.segmentation;
  std::unordered_map<std::int64_t, std::size_t> row_of;
  for (std::size_t r = 0; r < b.molecule_ids.size(); ++r) row_of.emplace(b.molecule_ids[r], r);
  std::vector<CellId> aligned(a.molecule_ids.size(), kUnassigned);
  for (std::size_t r = 0; r < a.molecule_ids.size(); ++r) {
    auto it = row_of.find(a.molecule_ids[r]);
    if (it == row_of.end()) {
      throw Error(ErrorCode::AlignmentError,
                  "molecule id " + std::to_string(a.molecule_ids[r]) + " missing from " +
                      "the second file");
    }
    aligned[r] = b.segmentation.cell_of(static_cast<MoleculeId>(it->second));
  }
  return CellSegmentation::from_assignment(std::move(aligned));
}

int run_eval(const EvalArgs& args) {
  require_readable(args.a);
  require_readable(args.b);
  const AssignmentFile fa = read_assignments(fs::path(args.a));
  const AssignmentFile fb = read_assignments(fs::path(args.b));
  const CellSegmentation b = align_to(fa, fb);
  const MatchResult match = match_cells(fa.segmentation, b);

  nlohmann::json doc = to_json(match);
  doc["summary_a"] = to_json(summary_metrics(fa.segmentation, fa.segmentation.molecule_count()));
  doc["summary_b"] = to_json(summary_metrics(b, b.molecule_count()));
  const fs::path dir(args.out_dir);
  {
    auto out = open_output(dir / "match.json");
    out << doc.dump(2) << '\n';
  }
  {
    auto out = open_output(dir / "pairs.csv");
    write_matched_pairs(out, match);
  }
  std::cout << "median_dice: " << (match.median_dice ? format_double(*match.median_dice) : "null")
            << '\n';
  return 0;
}

struct ContourArgs {
  std::string assignments, out, vertices;
  double r_cell = 8.0;
  std::optional<double> bin_size, sigma;
};

int run_contours(const ContourArgs& args) {
  require_readable(args.assignments);
  const AssignmentFile file = read_assignments(fs::path(args.assignments));
  if (file.table.size() != file.segmentation.molecule_count()) {
    throw Error(ErrorCode::MissingColumn, "contours need x, y and gene columns in the assignment file");
  }
  const double bin = args.bin_size.value_or(args.r_cell / 4.0);
  const double sigma = args.sigma.value_or(args.r_cell / 4.0);
  const auto polygons = cell_contours(file.segmentation, file.table, bin, sigma);
  {
    auto out = open_output(args.out);
    write_geojson(out, polygons);
  }
  if (!args.vertices.empty()) {
    auto out = open_output(args.vertices);
    write_vertex_list(out, polygons);
  }
  std::cout << "polygons: " << polygons.size() << '\n';
  return 0;
}

struct SynthArgs {
  SynthConfig config;
  std::string out_dir = ".";
};

int run_synth(const SynthArgs& args) {
  const SynthResult synth = synthesize(args.config);
  const fs::path dir(args.out_dir);
  {
    auto out = open_output(dir / "molecules.csv");
    write_molecules(out, synth.table);
  }
  {
    auto out = open_output(dir / "truth.csv");
    write_assignments(out, synth.table, synth.truth);
  }
  std::cout << "molecules: " << synth.table.size() << "  cells: " << synth.truth.cell_count() << '\n';
  return 0;
}

/// CLI11 only reads config files for the top-level app, so the subcommand's
/// file is parsed with CLI11's reader and fed to options not given as flags.
void apply_config_file(CLI::App& command, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  CLI::ConfigBase reader;
  for (const CLI::ConfigItem& item : reader.from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    CLI::Option* opt = command.get_option_no_throw("--" + item.name);
    if (opt == nullptr) {
      std::string dashed = item.name;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      opt = command.get_option_no_throw("--" + dashed);
    }
    if (opt == nullptr || item.name == "config") {
      throw CLI::ConfigError::Extras(item.fullname());
    }
    if (opt->count() > 0) continue;
    std::vector<std::string> values = item.inputs;
    if (opt->get_type_size() == 0) {
      // Flags accept true/false style values.
      if (values.size() == 1 && CLI::detail::to_flag_value(values[0]) <= 0) continue;
      values.clear();
    }
    opt->add_result(values);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell segmentation of in situ transcriptomics point clouds"};
  app.require_subcommand(1, 1);
  bool verbose = false, quiet = false;
  app.add_flag("--verbose", verbose, "Log stage timings and progress to stderr");
  app.add_flag("--quiet", quiet, "Suppress warnings");

  SegmentArgs seg;
  auto* segment_cmd = app.add_subcommand("segment", "Segment a molecule table into cells");
  std::string config_path;
  segment_cmd->add_option("--config", config_path,
                          "key=value file supplying any of these flags; command-line flags win");
  segment_cmd->add_option("--input", seg.input, "Molecule table (x, y[, z], gene)")->required();
  segment_cmd->add_option("--r-cell", seg.r_cell, "Typical cell radius in micrometres")
      ->required()
      ->check(CLI::PositiveNumber);
  segment_cmd->add_option("--k", seg.k, "Feature neighbourhood size (default 35)");
  segment_cmd->add_option("--expected-per-cell", seg.expected_per_cell,
                          "Expected molecules per cell; sets k to a third of it");
  segment_cmd->add_option("--n-min", seg.n_min, "Smallest cell kept")->capture_default_str();
  segment_cmd->add_option("--seed", seg.seed, "Random seed")->capture_default_str();
  segment_cmd->add_option("--out-dir", seg.out_dir, "Output directory")->capture_default_str();
  segment_cmd->add_flag("--no-prefilter", seg.no_prefilter, "Keep sparse background molecules");
  segment_cmd->add_option("--gaussian-features", seg.gaussian_features,
                          "Weight neighbours by a Gaussian of this bandwidth (micrometres)");
  segment_cmd->add_option("--x-column", seg.x_column)->capture_default_str();
  segment_cmd->add_option("--y-column", seg.y_column)->capture_default_str();
  segment_cmd->add_option("--z-column", seg.z_column, "Optional third coordinate column");
  segment_cmd->add_option("--gene-column", seg.gene_column)->capture_default_str();
  segment_cmd->add_option("--hidden", seg.hidden, "Encoder hidden width")->capture_default_str();
  segment_cmd->add_option("--latent", seg.latent, "Embedding dimension")->capture_default_str();
  segment_cmd->add_option("--max-epochs", seg.max_epochs)->capture_default_str();
  segment_cmd->add_option("--patience", seg.patience)->capture_default_str();
  segment_cmd->add_flag("--no-early-stopping", seg.no_early_stopping);
  segment_cmd->add_option("--pairs-per-epoch", seg.pairs_per_epoch,
                          "Training pairs per epoch (0 = one per molecule)")
      ->capture_default_str();
  segment_cmd->add_option("--learning-rate", seg.learning_rate)->capture_default_str();
  segment_cmd->add_option("--dump-features", seg.dump_features, "Write the feature matrix here");
  segment_cmd->add_option("--dump-graph", seg.dump_graph, "Write the weighted signed graph here");
  segment_cmd->add_option("--save-model", seg.save_model, "Write the trained network here");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Match two segmentations and report Dice indices");
  eval_cmd->add_option("--a", ev.a, "First assignment file")->required();
  eval_cmd->add_option("--b", ev.b, "Second assignment file")->required();
  eval_cmd->add_option("--out", ev.out_dir, "Output directory")->required();

  ContourArgs co;
  auto* contours_cmd = app.add_subcommand("contours", "Export cell outlines as GeoJSON");
  contours_cmd->add_option("--assignments", co.assignments, "Assignment file with x, y, gene")->required();
  contours_cmd->add_option("--r-cell", co.r_cell, "Cell radius; sets the defaults of the next two")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  contours_cmd->add_option("--bin-size", co.bin_size, "Pixel size in micrometres (default R_cell / 4)")
      ->check(CLI::PositiveNumber);
  contours_cmd->add_option("--sigma", co.sigma, "Smoothing bandwidth in micrometres (default R_cell / 4)")
      ->check(CLI::NonNegativeNumber);
  contours_cmd->add_option("--out", co.out, "GeoJSON output path")->required();
  contours_cmd->add_option("--vertices", co.vertices, "Optional cell_id,vertex,x,y listing");

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic benchmark with ground truth");
  synth_cmd->add_option("--cells", sy.config.cells)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--molecules-per-cell", sy.config.molecules_per_cell)
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--types", sy.config.types)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--genes", sy.config.genes)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--r-cell", sy.config.r_cell)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", sy.config.noise, "Fraction of background rows")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  synth_cmd->add_option("--seed", sy.config.seed)->capture_default_str();
  synth_cmd->add_option("--out-dir", sy.out_dir)->capture_default_str();

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) apply_config_file(*segment_cmd, config_path);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  set_log_level(quiet ? LogLevel::Quiet : verbose ? LogLevel::Info : LogLevel::Warning);
  try {
    if (*segment_cmd) return run_segment(seg);
    if (*eval_cmd) return run_eval(ev);
    if (*contours_cmd) return run_contours(co);
    if (*synth_cmd) return run_synth(sy);
  } catch (const Error& e) {
    std::cerr << "error";
    if (!e.stage().empty()) std::cerr << " [" << e.stage() << "]";
    std::cerr << " " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
