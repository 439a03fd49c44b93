#include "sgseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sgseg/error.hpp"
#include "sgseg/rng.hpp"

namespace sgseg {

void SynthConfig::validate() const {
  if (cells == 0 || molecules_per_cell == 0 || types == 0 || genes == 0) {
    throw Error(ErrorCode::InvalidArgument, "synthetic counts must all be >= 1");
  }
  if (!(r_cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "R_cell must be > 0");
  if (!(noise >= 0.0 && noise < 1.0)) throw Error(ErrorCode::InvalidArgument, "noise must lie in [0, 1)");
}

namespace {

std::vector<double> dirichlet_ones(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (double& v : w) sum += (v = rng.gamma(1.0));
  for (double& v : w) v /= sum;
  return w;
}

std::size_t draw_categorical(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

SynthResult synthesize(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  SynthResult out;

  std::vector<std::string> names;
  for (std::size_t g = 0; g < config.genes; ++g) names.push_back("gene" + std::to_string(g));
  GenePanel panel(names);

  // Type profiles.
  const std::size_t quarter = std::max<std::size_t>(1, config.genes / 4);
  std::vector<std::vector<double>> cumulative;
  for (std::size_t t = 0; t < config.types; ++t) {
    std::vector<double> profile(config.genes, 0.0);
    const std::size_t start = t * config.genes / config.types;
    std::vector<bool> in_block(config.genes, false);
    for (std::size_t q = 0; q < quarter; ++q) in_block[(start + q) % config.genes] = true;
    const std::size_t rest = config.genes - quarter;
    const auto block_w = dirichlet_ones(quarter, rng);
    const auto rest_w = dirichlet_ones(std::max<std::size_t>(rest, 1), rng);
    const double block_mass = rest == 0 ? 1.0 : 0.8;
    std::size_t bi = 0, ri = 0;
    for (std::size_t g = 0; g < config.genes; ++g) {
      profile[g] = in_block[g] ? block_mass * block_w[bi++] : (1.0 - block_mass) * rest_w[ri++];
    }
    std::vector<double> cum(config.genes);
    std::partial_sum(profile.begin(), profile.end(), cum.begin());
    cumulative.push_back(std::move(cum));
    out.profiles.push_back(std::move(profile));
  }

  const double pitch = 4.0 * config.r_cell;
  const double jitter = 0.5 * config.r_cell;
  const double sigma = 0.5 * config.r_cell;
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(config.cells))));
  const std::size_t rows = (config.cells + cols - 1) / cols;

  struct Row {
    double x, y;
    GeneIndex gene;
    CellId cell;
  };
  std::vector<Row> data;
  data.reserve(config.cells * config.molecules_per_cell);
  for (std::size_t c = 0; c < config.cells; ++c) {
    const double cx = static_cast<double>(c % cols) * pitch + rng.uniform(-jitter, jitter);
    const double cy = static_cast<double>(c / cols) * pitch + rng.uniform(-jitter, jitter);
    const std::size_t type = static_cast<std::size_t>(rng.index(config.types));
    out.centers.push_back({cx, cy});
    out.cell_types.push_back(type);
    for (std::size_t m = 0; m < config.molecules_per_cell; ++m) {
      const double x = cx + sigma * rng.normal();
      const double y = cy + sigma * rng.normal();
      data.push_back({x, y, static_cast<GeneIndex>(draw_categorical(cumulative[type], rng)),
                      static_cast<CellId>(c)});
    }
  }

  const std::size_t cell_rows = data.size();
  const auto noise_rows =
      static_cast<std::size_t>(std::llround(static_cast<double>(cell_rows) * config.noise / (1.0 - config.noise)));
  const double lo = -2.0 * config.r_cell;
  const double hi_x = static_cast<double>(cols - 1) * pitch + 2.0 * config.r_cell;
  const double hi_y = static_cast<double>(rows - 1) * pitch + 2.0 * config.r_cell;
  for (std::size_t m = 0; m < noise_rows; ++m) {
    const double x = rng.uniform(lo, hi_x);
    const double y = rng.uniform(lo, hi_y);
    data.push_back({x, y, static_cast<GeneIndex>(rng.index(config.genes)), kUnassigned});
  }

  for (std::size_t i = data.size(); i > 1; --i) {
    std::swap(data[i - 1], data[rng.index(i)]);
  }

  out.table = MoleculeTable(2, panel);
  std::vector<CellId> truth;
  truth.reserve(data.size());
  for (const Row& r : data) {
    const double p[2] = {r.x, r.y};
    out.table.add(p, r.gene);
    truth.push_back(r.cell);
  }
  out.truth = CellSegmentation::from_assignment(std::move(truth));
  return out;
}

}  // namespace sgseg
