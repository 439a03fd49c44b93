#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sgseg/gmm.hpp"
#include "sgseg/pipeline.hpp"
#include "sgseg/synth.hpp"
#include "test_util.hpp"

using namespace sgseg;
using sgseg::testing::make_table;
using sgseg::testing::random_table;

namespace {

std::vector<double> two_clusters(Rng& rng) {
  std::vector<double> v;
  for (int i = 0; i < 50; ++i) v.push_back(1.0 + 0.01 * rng.normal());
  for (int i = 0; i < 50; ++i) v.push_back(10.0 + 0.01 * rng.normal());
  return v;
}

double normal_pdf(double x, const GaussianComponent& c) {
  return std::exp(-0.5 * (x - c.mean) * (x - c.mean) / c.variance) / std::sqrt(2 * M_PI * c.variance);
}

}  // namespace

TEST(Gmm, RecoversTwoClusters) {
  Rng rng(1);
  const auto v = two_clusters(rng);
  const Gmm1D m = gmm_fit_1d(v);
  EXPECT_NEAR(m.low.mean, 1.0, 0.2);
  EXPECT_NEAR(m.high.mean, 10.0, 0.2);
  EXPECT_NEAR(m.low.weight + m.high.weight, 1.0, 1e-12);

  // At convergence the fit is a fixed point of one EM step recomputed here
  // from scratch with plain densities.
  double nh = 0, sh = 0, sl = 0;
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = m.low.weight * normal_pdf(v[i], m.low), b = m.high.weight * normal_pdf(v[i], m.high);
    r[i] = b / (a + b);
    nh += r[i];
    sh += r[i] * v[i];
    sl += (1 - r[i]) * v[i];
  }
  EXPECT_NEAR(sh / nh, m.high.mean, 1e-6);
  EXPECT_NEAR(sl / (v.size() - nh), m.low.mean, 1e-6);
  EXPECT_NEAR(nh / v.size(), m.high.weight, 1e-6);
  EXPECT_NEAR(gmm_log_likelihood(m, v), m.log_likelihood.back(), 1e-9 * std::abs(m.log_likelihood.back()));
}

TEST(Gmm, DegenerateAndTooFew) {
  const std::vector<double> same(10, 3.0);
  EXPECT_SGSEG_ERROR(gmm_fit_1d(same), ErrorCode::DegenerateData);
  const std::vector<double> three{1, 2, 3};
  EXPECT_SGSEG_ERROR(gmm_fit_1d(three), ErrorCode::InvalidArgument);
}

TEST(Gmm, LogLikelihoodNeverDecreases) {
  Rng rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v;
    const std::size_t n = 4 + rng.index(300);
    const int shape = rep % 4;
    for (std::size_t i = 0; i < n; ++i) {
      switch (shape) {
        case 0: v.push_back(rng.normal()); break;
        case 1: v.push_back(rng.uniform() < 0.3 ? 5 + rng.normal() : rng.normal()); break;
        case 2: v.push_back(rng.gamma(0.7)); break;
        default: v.push_back(static_cast<double>(rng.index(4))); break;  // heavy ties
      }
    }
    const Gmm1D m = gmm_fit_1d(v);
    ASSERT_GE(m.log_likelihood.size(), 2u);
    EXPECT_LE(m.iterations, 200u);
    for (std::size_t k = 1; k < m.log_likelihood.size(); ++k) {
      EXPECT_GE(m.log_likelihood[k], m.log_likelihood[k - 1]) << "dataset " << rep << " step " << k;
    }
    EXPECT_GT(m.low.variance, 0.0);
    EXPECT_GT(m.high.variance, 0.0);
    EXPECT_LE(m.low.mean, m.high.mean);
  }
}

TEST(Prefilter, RemovesExactlyTheIsolatedMolecules) {
  std::vector<std::vector<double>> pts;
  std::vector<std::string> genes;
  for (int x = 0; x < 20; ++x)
    for (int y = 0; y < 20; ++y) {
      pts.push_back({x * 1.0, y * 1.0});
      genes.push_back("A");
    }
  for (int k = 0; k < 20; ++k) {
    pts.push_back({1000.0 + 100.0 * (k % 5), 1000.0 + 100.0 * (k / 5)});
    genes.push_back("A");
  }
  const MoleculeTable t = make_table(pts, genes);
  SpatialIndex index(t);
  const PrefilterResult r = prefilter_extracellular(t, index);
  EXPECT_EQ(r.removed, 20u);
  // Hand threshold halfway between the two 15-NN distance populations.
  double max_grid = 0, min_far = INFINITY;
  for (MoleculeId i = 0; i < 400; ++i) max_grid = std::max(max_grid, r.rank_distance[i]);
  for (MoleculeId i = 400; i < 420; ++i) min_far = std::min(min_far, r.rank_distance[i]);
  ASSERT_GT(min_far, 10 * max_grid);
  for (MoleculeId i = 0; i < t.size(); ++i) EXPECT_EQ(r.keep[i], i < 400) << i;
}

TEST(Prefilter, UniformCloudAndPreconditions) {
  const MoleculeTable t = random_table(2000, 2, 1, 100.0, 3);
  SpatialIndex index(t);
  const PrefilterResult r = prefilter_extracellular(t, index);
  // A unimodal distance distribution gets split; record that a sizeable but
  // partial share is removed.
  EXPECT_GT(r.removed, 0u);
  EXPECT_LT(r.removed, t.size());
  const MoleculeTable small = random_table(15, 2, 1, 10.0, 4);
  SpatialIndex si(small);
  EXPECT_SGSEG_ERROR(prefilter_extracellular(small, si), ErrorCode::TooFewMolecules);
}

TEST(Postfilter, DropsSmallComponentsAndRenumbers) {
  Partition p;
  p.component_count = 3;
  for (int i = 0; i < 45; ++i) p.labels.push_back(i < 5 ? 0 : (i % 2 ? 1 : 2));
  // Components: 0 has 5, 1 has 20, 2 has 20.
  const CellSegmentation s = postfilter_small_cells(p, 20);
  EXPECT_EQ(s.cell_count(), 2u);
  EXPECT_EQ(s.assigned_count(), 40u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(s.cell_of(i), kUnassigned);
  EXPECT_EQ(s.cell_of(5), 0);  // id 5 is odd, original component 1, first seen
  EXPECT_EQ(s.cell_of(6), 1);

  Partition q;
  q.component_count = 2;
  q.labels.assign(40, 0);
  q.labels.insert(q.labels.end(), 5, 1);
  const CellSegmentation t = postfilter_small_cells(q, 30);
  EXPECT_EQ(t.cell_count(), 1u);
  EXPECT_EQ(t.molecule_count() - t.assigned_count(), 5u);
}

TEST(PipelineConfig, ValidationAndK) {
  PipelineConfig c;
  EXPECT_SGSEG_ERROR(c.validate(), ErrorCode::InvalidArgument);  // neither k nor expected count
  c.expected_per_cell = 24;
  EXPECT_EQ(c.resolved_k(), 8u);
  c.k = 35;
  EXPECT_EQ(c.resolved_k(), 35u);
  c.r_cell = 0;
  EXPECT_SGSEG_ERROR(c.validate(), ErrorCode::InvalidArgument);
  c.r_cell = 8;
  c.n_min = 0;
  EXPECT_SGSEG_ERROR(c.validate(), ErrorCode::InvalidArgument);
}

namespace {

SynthResult small_synth(std::uint64_t seed) {
  SynthConfig s;
  s.cells = 12;
  s.molecules_per_cell = 80;
  s.types = 3;
  s.genes = 16;
  s.seed = seed;
  return synthesize(s);
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.k = 20;
  c.n_min = 20;
  c.seed = 5;
  c.train.max_epochs = 60;
  return c;
}

}  // namespace

TEST(Segment, DeterministicAndConsistent) {
  const SynthResult data = small_synth(1);
  const SegmentResult a = segment(data.table, small_config(), true);
  const SegmentResult b = segment(data.table, small_config());
  EXPECT_EQ(a.segmentation, b.segmentation);
  EXPECT_EQ(a.report.loss_history, b.report.loss_history);
  std::ostringstream fa, fb;
  write_assignments(fa, data.table, a.segmentation);
  write_assignments(fb, data.table, b.segmentation);
  EXPECT_EQ(fa.str(), fb.str());

  const auto& seg = a.segmentation;
  EXPECT_EQ(seg.molecule_count(), data.table.size());
  EXPECT_EQ(a.report.cell_count, seg.cell_count());
  EXPECT_DOUBLE_EQ(a.report.assigned_fraction,
                   static_cast<double>(seg.assigned_count()) / static_cast<double>(data.table.size()));
  for (const auto& cell : seg.cells()) EXPECT_GE(cell.size(), 20u);
  // Prefiltered molecules never receive a cell.
  ASSERT_TRUE(a.artifacts.has_value());
  std::vector<bool> kept(data.table.size(), false);
  for (MoleculeId id : a.artifacts->kept_ids) kept[id] = true;
  for (MoleculeId i = 0; i < data.table.size(); ++i)
    if (!kept[i]) EXPECT_EQ(seg.cell_of(i), kUnassigned);
  EXPECT_EQ(a.report.prefiltered, data.table.size() - a.artifacts->kept_ids.size());

  const auto json = a.report.to_json();
  EXPECT_EQ(json.at("cell_count"), seg.cell_count());
  EXPECT_EQ(json.at("config").at("seed"), 5);
  EXPECT_TRUE(json.contains("timings"));
}

TEST(Segment, SeedChangesTraining) {
  const SynthResult data = small_synth(2);
  PipelineConfig c = small_config();
  const SegmentResult a = segment(data.table, c);
  c.seed = 6;
  const SegmentResult b = segment(data.table, c);
  EXPECT_NE(a.report.loss_history, b.report.loss_history);
}

TEST(Segment, ErrorsNameTheStage) {
  const SynthResult data = small_synth(3);
  PipelineConfig c = small_config();
  c.k = 100000;
  try {
    segment(data.table, c);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KTooLarge);
    EXPECT_EQ(e.stage(), "features");
  }
  const MoleculeTable tiny = random_table(10, 2, 2, 5.0, 1);
  try {
    segment(tiny, small_config());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "prefilter");
  }
}

TEST(Synth, CountsAndNoise) {
  SynthConfig s;
  s.cells = 4;
  s.molecules_per_cell = 100;
  s.noise = 0.0;
  const SynthResult a = synthesize(s);
  EXPECT_EQ(a.table.size(), 400u);
  EXPECT_EQ(a.truth.cell_count(), 4u);
  EXPECT_EQ(a.truth.assigned_count(), 400u);

  s.noise = 0.1;
  const SynthResult b = synthesize(s);
  EXPECT_EQ(b.table.size() - b.truth.assigned_count(), 44u);  // round(400 * 0.1 / 0.9)
  EXPECT_NEAR(static_cast<double>(b.table.size() - b.truth.assigned_count()) / b.table.size(), 0.1, 0.005);

  s.cells = 0;
  EXPECT_SGSEG_ERROR(synthesize(s), ErrorCode::InvalidArgument);
}

TEST(Synth, GeometryAndProfiles) {
  SynthConfig s;
  s.cells = 50;
  s.seed = 8;
  const SynthResult r = synthesize(s);
  for (std::size_t a = 0; a < r.centers.size(); ++a)
    for (std::size_t b = a + 1; b < r.centers.size(); ++b) {
      const double d = std::hypot(r.centers[a][0] - r.centers[b][0], r.centers[a][1] - r.centers[b][1]);
      EXPECT_GE(d, 3 * s.r_cell);
    }
  for (const auto& p : r.profiles) {
    double total = 0, top = 0;
    std::vector<double> sorted = p;
    std::sort(sorted.rbegin(), sorted.rend());
    for (double v : p) total += v;
    for (std::size_t g = 0; g < s.genes / 4; ++g) top += sorted[g];
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_GE(top, 0.8 - 1e-12);
  }
  EXPECT_EQ(synthesize(s).table.coords(), r.table.coords());
}

TEST(Assignments, WriteReadRoundTrip) {
  const SynthResult r = small_synth(4);
  std::stringstream buf;
  write_assignments(buf, r.table, r.truth);
  const AssignmentFile f = read_assignments(buf);
  EXPECT_EQ(f.segmentation, r.truth);
  EXPECT_EQ(f.table.coords(), r.table.coords());
  EXPECT_EQ(f.molecule_ids.size(), r.table.size());
  EXPECT_EQ(f.molecule_ids[3], 3);
}

TEST(CellSegmentation, RenumbersDensely) {
  const auto s = CellSegmentation::from_assignment({5, -1, 2, 5, 9});
  EXPECT_EQ(s.assignment(), (std::vector<CellId>{0, -1, 1, 0, 2}));
  EXPECT_EQ(s.cells()[0], (std::vector<MoleculeId>{0, 3}));
  EXPECT_EQ(s.assigned_count(), 4u);
  EXPECT_SGSEG_ERROR(CellSegmentation::from_assignment({-2}), ErrorCode::InvalidArgument);
}
