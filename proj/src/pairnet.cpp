#include "sgseg/pairnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sgseg/error.hpp"

namespace sgseg {

PairNet::PairNet(std::size_t input, std::size_t hidden, std::size_t latent)
    : input_(input), hidden_(hidden), latent_(latent) {
  if (input == 0 || hidden == 0 || latent == 0) {
    throw Error(ErrorCode::InvalidArgument, "network dimensions must be >= 1");
  }
  params_.assign(hidden * input + hidden + latent * hidden + latent + 2, 0.0);
}

PairNet init_network(std::size_t panel_size, std::size_t hidden, std::size_t latent,
                     std::uint64_t seed) {
  PairNet net(panel_size, hidden, latent);
  Rng rng(seed);
  auto fill = [&](auto&& block, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index c = 0; c < block.cols(); ++c)
      for (Eigen::Index r = 0; r < block.rows(); ++r) block(r, c) = rng.uniform(-bound, bound);
  };
  fill(net.w1(), panel_size);
  fill(net.b1(), panel_size);
  fill(net.w2(), hidden);
  fill(net.b2(), hidden);
  net.scale() = -1.0;
  net.bias() = 0.0;
  return net;
}

namespace {

template <class Derived>
PairNet::Matrix elu_of(const Eigen::MatrixBase<Derived>& a) {
  return a.unaryExpr([](double t) { return elu(t); });
}

template <class Derived>
PairNet::Matrix elu_grad_of(const Eigen::MatrixBase<Derived>& a) {
  return a.unaryExpr([](double t) { return t > 0.0 ? 1.0 : std::exp(t); });
}

void check_dims(const PairNet& net, std::size_t size) {
  if (size != net.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "feature length " + std::to_string(size) + " does not match network input " +
                    std::to_string(net.input_dim()));
  }
}

}  // namespace

PairNet::Vector encode(const PairNet& net, std::span<const double> x) {
  check_dims(net, x.size());
  PairNet::ConstVectorMap input(x.data(), static_cast<Eigen::Index>(x.size()));
  const PairNet::Vector h = elu_of(net.w1() * input + net.b1());
  return elu_of(net.w2() * h + net.b2());
}

PairNet::Matrix encode_all(const PairNet& net, const FeatureMatrix& features) {
  check_dims(net, features.cols());
  // FeatureMatrix is row-major n x L, i.e. column-major L x n.
  PairNet::ConstMatrixMap x(features.values().data(), static_cast<Eigen::Index>(features.cols()),
                            static_cast<Eigen::Index>(features.rows()));
  const PairNet::Matrix h = elu_of((net.w1() * x).colwise() + net.b1());
  return elu_of((net.w2() * h).colwise() + net.b2());
}

double sigmoid_of_distance(const PairNet& net, double latent_distance) {
  const double s = std::clamp(net.scale() * latent_distance + net.bias(), -kLogitClamp, kLogitClamp);
  return 1.0 / (1.0 + std::exp(-s));
}

double pair_posterior(const PairNet& net, std::span<const double> x_i,
                      std::span<const double> x_j) {
  const PairNet::Vector zi = encode(net, x_i);
  const PairNet::Vector zj = encode(net, x_j);
  return sigmoid_of_distance(net, (zi - zj).norm());
}

double bce_loss(double y, int label) {
  const double p = std::clamp(y, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -std::log(p) : -std::log1p(-p);
}

void TrainConfig::validate() const {
  if (!(r_cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "R_cell must be > 0");
  if (batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  if (max_epochs == 0) throw Error(ErrorCode::InvalidArgument, "max_epochs must be >= 1");
  if (early_stopping && patience >= max_epochs) {
    throw Error(ErrorCode::InvalidArgument, "patience must be < max_epochs");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  if (!(negative_max_factor > 2.0)) {
    throw Error(ErrorCode::InvalidArgument, "negative_max_factor must exceed 2");
  }
}

std::uint64_t TrainConfig::hash() const {
  std::ostringstream s;
  s << format_double(r_cell) << '|' << max_epochs << '|' << patience << '|' << early_stopping << '|'
    << batch_size << '|' << format_double(learning_rate) << '|' << format_double(beta1) << '|'
    << format_double(beta2) << '|' << format_double(epsilon) << '|' << format_double(min_improvement)
    << '|' << seed << '|' << pairs_per_epoch << '|' << format_double(negative_max_factor);
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

PairSampler::PairSampler(const MoleculeTable& table, const SpatialIndex& index, double r_cell,
                         double negative_max_factor)
    : index_(index),
      r_cell_(r_cell),
      negative_max_(negative_max_factor * r_cell),
      positive_grid_(table, r_cell),
      negative_grid_(table, negative_max_factor * r_cell) {
  if (table.empty()) throw Error(ErrorCode::EmptyTable, "cannot sample pairs from an empty table");
  status_[0].assign(table.size(), 0);
  status_[1].assign(table.size(), 0);
}

bool PairSampler::eligible(Kind kind, double d) const {
  return kind == Kind::Positive ? d < r_cell_ : (d > 2.0 * r_cell_ && d <= negative_max_);
}

std::optional<MoleculeId> PairSampler::partner(Kind kind, MoleculeId anchor, Rng& rng) {
  auto& status = status_[static_cast<int>(kind)];
  if (status[anchor] == 2) return std::nullopt;
  const BucketGrid& grid = kind == Kind::Positive ? positive_grid_ : negative_grid_;
  const auto p = index_.position(anchor);

  // Rejection sampling over the covering grid cells is exactly uniform over
  // the eligible set; fall back to enumeration when acceptance is poor.
  grid.cover(p, ranges_);
  std::size_t total = 0;
  for (const auto& r : ranges_) total += r.end - r.begin;
  constexpr int kAttempts = 32;
  for (int attempt = 0; attempt < kAttempts && total > 1; ++attempt) {
    std::size_t pick = rng.index(total);
    for (const auto& r : ranges_) {
      const std::size_t len = r.end - r.begin;
      if (pick < len) {
        const MoleculeId j = grid.members()[r.begin + pick];
        if (j != anchor && eligible(kind, distance(p, index_.position(j)))) {
          status[anchor] = 1;
          return j;
        }
        break;
      }
      pick -= len;
    }
  }

  std::vector<MoleculeId> candidates;
  const double radius = kind == Kind::Positive ? r_cell_ : negative_max_;
  index_.for_each_within(p, radius, [&](MoleculeId j, double d) {
    if (j != anchor && eligible(kind, d)) candidates.push_back(j);
  });
  if (candidates.empty()) {
    status[anchor] = 2;
    ++exhausted_[static_cast<int>(kind)];
    return std::nullopt;
  }
  status[anchor] = 1;
  std::sort(candidates.begin(), candidates.end());
  return candidates[rng.index(candidates.size())];
}

std::vector<LabeledPair> PairSampler::sample(std::size_t count, Rng& rng) {
  std::vector<LabeledPair> pairs;
  pairs.reserve(count);
  const std::size_t n = index_.size();
  for (std::size_t s = 0; s < count; ++s) {
    const Kind kind = s % 2 == 0 ? Kind::Positive : Kind::Negative;
    while (true) {
      if (exhausted_[static_cast<int>(kind)] == n) {
        throw Error(ErrorCode::NoEligiblePairs,
                    std::string("no molecule has an eligible ") +
                        (kind == Kind::Positive ? "positive" : "negative") + " partner");
      }
      const auto anchor = static_cast<MoleculeId>(rng.index(n));
      if (auto j = partner(kind, anchor, rng)) {
        pairs.push_back({anchor, *j, kind == Kind::Positive ? 1 : 0});
        break;
      }
    }
  }
  return pairs;
}

std::vector<LabeledPair> sample_training_pairs(const MoleculeTable& table,
                                               const SpatialIndex& index,
                                               const TrainConfig& config, Rng& rng) {
  PairSampler sampler(table, index, config.r_cell, config.negative_max_factor);
  const std::size_t count = config.pairs_per_epoch ? config.pairs_per_epoch : table.size();
  return sampler.sample(count, rng);
}

double batch_loss_and_gradient(const PairNet& net, const FeatureMatrix& features,
                               std::span<const LabeledPair> batch, std::vector<double>& gradient) {
  check_dims(net, features.cols());
  const auto b = static_cast<Eigen::Index>(batch.size());
  const auto in = static_cast<Eigen::Index>(net.input_dim());
  gradient.assign(net.parameter_count(), 0.0);
  if (b == 0) return 0.0;

  // Columns [0, b) hold the first molecule of each pair, [b, 2b) the second.
  PairNet::Matrix x(in, 2 * b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto& pair = batch[static_cast<std::size_t>(c)];
    x.col(c) = PairNet::ConstVectorMap(features.row(pair.i).data(), in);
    x.col(b + c) = PairNet::ConstVectorMap(features.row(pair.j).data(), in);
  }
  const PairNet::Matrix a1 = (net.w1() * x).colwise() + net.b1();
  const PairNet::Matrix h1 = elu_of(a1);
  const PairNet::Matrix a2 = (net.w2() * h1).colwise() + net.b2();
  const PairNet::Matrix z = elu_of(a2);
  const PairNet::Matrix diff = z.leftCols(b) - z.rightCols(b);

  const double inv_b = 1.0 / static_cast<double>(b);
  double loss_sum = 0.0;
  double g_scale = 0.0, g_bias = 0.0;
  PairNet::Matrix g_z(z.rows(), 2 * b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const int label = batch[static_cast<std::size_t>(c)].label;
    const double delta = diff.col(c).norm();
    const double s_raw = net.scale() * delta + net.bias();
    const double s = std::clamp(s_raw, -kLogitClamp, kLogitClamp);
    const double y = 1.0 / (1.0 + std::exp(-s));
    loss_sum += bce_loss(y, label);

    const bool clamped = s != s_raw || y < kProbClamp || y > 1.0 - kProbClamp;
    const double g_s = clamped ? 0.0 : (y - label) * inv_b;
    g_scale += g_s * delta;
    g_bias += g_s;
    const double g_delta = g_s * net.scale();
    if (delta > 0.0) {
      g_z.col(c) = (g_delta / delta) * diff.col(c);
    } else {
      g_z.col(c).setZero();
    }
    g_z.col(b + c) = -g_z.col(c);
  }

  PairNet grad(net.input_dim(), net.hidden_dim(), net.latent_dim());
  const PairNet::Matrix g_a2 = g_z.cwiseProduct(elu_grad_of(a2));
  grad.w2() = g_a2 * h1.transpose();
  grad.b2() = g_a2.rowwise().sum();
  const PairNet::Matrix g_a1 = (net.w2().transpose() * g_a2).cwiseProduct(elu_grad_of(a1));
  grad.w1() = g_a1 * x.transpose();
  grad.b1() = g_a1.rowwise().sum();
  grad.scale() = g_scale;
  grad.bias() = g_bias;
  auto flat = grad.parameters();
  gradient.assign(flat.begin(), flat.end());
  return loss_sum * inv_b;
}

Adam::Adam(std::size_t parameter_count, double learning_rate, double beta1, double beta2,
           double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(parameter_count, 0.0),
      v_(parameter_count, 0.0) {}

void Adam::step(std::span<double> parameters, std::span<const double> gradient) {
  if (parameters.size() != m_.size() || gradient.size() != m_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "Adam state does not match parameter count");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const double g = gradient[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    parameters[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

TrainResult train(PairNet net, const MoleculeTable& table, const SpatialIndex& index,
                  const FeatureMatrix& features, const TrainConfig& config) {
  config.validate();
  if (net.input_dim() != table.panel().size() || features.rows() != table.size()) {
    throw Error(ErrorCode::DimensionMismatch, "network, features and table sizes disagree");
  }
  Rng rng(config.seed);
  PairSampler sampler(table, index, config.r_cell, config.negative_max_factor);
  Adam adam(net.parameter_count(), config.learning_rate, config.beta1, config.beta2,
            config.epsilon);
  const std::size_t per_epoch = config.pairs_per_epoch ? config.pairs_per_epoch : table.size();

  TrainResult result{net, {}, 0, false};
  double best = INFINITY;
  std::size_t stale = 0;
  std::vector<double> gradient;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto pairs = sampler.sample(per_epoch, rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, pairs.size() - start);
      const std::span<const LabeledPair> batch(pairs.data() + start, len);
      epoch_sum += batch_loss_and_gradient(net, features, batch, gradient) * static_cast<double>(len);
      adam.step(net.parameters(), gradient);
    }
    const double epoch_loss = epoch_sum / static_cast<double>(pairs.size());
    result.loss_history.push_back(epoch_loss);
    if (epoch_loss < best - config.min_improvement) {
      best = epoch_loss;
      result.net = net;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale > config.patience && config.early_stopping) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'S', 'G', 'P', 'N', 'E', 'T', '0', '1'};

void write_u64_le(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw Error(ErrorCode::Io, "truncated network file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void save_network(const std::filesystem::path& path, const PairNet& net, const GenePanel& panel,
                  const TrainConfig& config) {
  nlohmann::json header = {
      {"format", "sgseg-pairnet"},
      {"version", 1},
      {"input", net.input_dim()},
      {"hidden", net.hidden_dim()},
      {"latent", net.latent_dim()},
      {"parameter_count", net.parameter_count()},
      {"seed", config.seed},
      {"config_hash", config.hash()},
      {"genes", panel.names()},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double p : net.parameters()) write_u64_le(out, std::bit_cast<std::uint64_t>(p));
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

PairNet load_network(const std::filesystem::path& path, const GenePanel* expected_panel) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error(ErrorCode::Io, path.string() + " is not a pair network file");
  }
  const std::uint64_t header_len = read_u64_le(in);
  if (header_len > (1u << 26)) throw Error(ErrorCode::Io, "implausible network header length");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error(ErrorCode::Io, "truncated network header");
  const auto header = nlohmann::json::parse(text);
  PairNet net(header.at("input").get<std::size_t>(), header.at("hidden").get<std::size_t>(),
              header.at("latent").get<std::size_t>());
  if (header.at("parameter_count").get<std::size_t>() != net.parameter_count()) {
    throw Error(ErrorCode::DimensionMismatch, "network header parameter count is inconsistent");
  }
  if (expected_panel && header.at("genes").get<std::vector<std::string>>() != expected_panel->names()) {
    throw Error(ErrorCode::DimensionMismatch, "network was trained on a different gene panel");
  }
  for (double& p : net.parameters()) p = std::bit_cast<double>(read_u64_le(in));
  return net;
}

}  // namespace sgseg
