#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgseg/features.hpp"
#include "sgseg/molecule_table.hpp"
#include "sgseg/rng.hpp"
#include "sgseg/spatial_index.hpp"

namespace sgseg {

/// Siamese pair classifier. Both molecules of a pair go through the same
/// encoder  z = ELU(W2 ELU(W1 x + b1) + b2);  the posterior that they share
/// a cell is  y = sigmoid(scale * |z_i - z_j|_2 + bias).
///
/// All parameters live in one flat buffer (W1 | b1 | W2 | b2 | scale | bias,
/// matrices column-major) so the optimizer, the serializer and gradient
/// checks can treat them uniformly.
class PairNet {
 public:
  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  PairNet() = default;
  PairNet(std::size_t input, std::size_t hidden, std::size_t latent);

  std::size_t input_dim() const { return input_; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t latent_dim() const { return latent_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  MatrixMap w1() { return {params_.data() + off_w1(), idx(hidden_), idx(input_)}; }
  VectorMap b1() { return {params_.data() + off_b1(), idx(hidden_)}; }
  MatrixMap w2() { return {params_.data() + off_w2(), idx(latent_), idx(hidden_)}; }
  VectorMap b2() { return {params_.data() + off_b2(), idx(latent_)}; }
  ConstMatrixMap w1() const { return {params_.data() + off_w1(), idx(hidden_), idx(input_)}; }
  ConstVectorMap b1() const { return {params_.data() + off_b1(), idx(hidden_)}; }
  ConstMatrixMap w2() const { return {params_.data() + off_w2(), idx(latent_), idx(hidden_)}; }
  ConstVectorMap b2() const { return {params_.data() + off_b2(), idx(latent_)}; }
  double& scale() { return params_[off_scale()]; }
  double& bias() { return params_[off_scale() + 1]; }
  double scale() const { return params_[off_scale()]; }
  double bias() const { return params_[off_scale() + 1]; }

  bool operator==(const PairNet&) const = default;

 private:
  static Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }
  std::size_t off_w1() const { return 0; }
  std::size_t off_b1() const { return hidden_ * input_; }
  std::size_t off_w2() const { return off_b1() + hidden_; }
  std::size_t off_b2() const { return off_w2() + latent_ * hidden_; }
  std::size_t off_scale() const { return off_b2() + latent_; }

  std::size_t input_ = 0, hidden_ = 0, latent_ = 0;
  std::vector<double> params_;
};

/// Weights and biases ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)); scale = -1,
/// bias = 0 so that larger latent distance starts out as lower posterior.
PairNet init_network(std::size_t panel_size, std::size_t hidden, std::size_t latent,
                     std::uint64_t seed);

inline double elu(double t) { return t > 0.0 ? t : std::expm1(t); }

/// Input to the sigmoid is clamped to this range.
inline constexpr double kLogitClamp = 30.0;
/// Posteriors are clamped to [kProbClamp, 1 - kProbClamp] inside the loss.
inline constexpr double kProbClamp = 1e-12;

PairNet::Vector encode(const PairNet& net, std::span<const double> x);
/// Latent codes for every feature row, one column per molecule.
PairNet::Matrix encode_all(const PairNet& net, const FeatureMatrix& features);

double sigmoid_of_distance(const PairNet& net, double latent_distance);
double pair_posterior(const PairNet& net, std::span<const double> x_i, std::span<const double> x_j);

double bce_loss(double y, int label);

struct LabeledPair {
  MoleculeId i, j;
  int label;  // 1 = same cell, 0 = different cells

  bool operator==(const LabeledPair&) const = default;
};

struct TrainConfig {
  double r_cell = 8.0;
  std::size_t max_epochs = 300;
  std::size_t patience = 15;
  bool early_stopping = true;
  std::size_t batch_size = 2048;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// An epoch counts as an improvement only if it beats the best by more than this.
  double min_improvement = 1e-6;
  std::uint64_t seed = 0;
  /// 0 means one pair per molecule.
  std::size_t pairs_per_epoch = 0;
  /// Negative partners lie in (2 r_cell, negative_max_factor * r_cell].
  double negative_max_factor = 6.0;

  void validate() const;
  std::uint64_t hash() const;
};

/// Draws labelled training pairs: positives at distance < r_cell, negatives
/// at distance in (2 r_cell, negative_max_factor * r_cell]. Anchors are
/// uniform with replacement and partners uniform over the eligible set.
class PairSampler {
 public:
  PairSampler(const MoleculeTable& table, const SpatialIndex& index, double r_cell,
              double negative_max_factor = 6.0);

  /// count pairs alternating positive, negative, positive, ...
  std::vector<LabeledPair> sample(std::size_t count, Rng& rng);

 private:
  enum class Kind { Positive = 0, Negative = 1 };
  bool eligible(Kind kind, double d) const;
  std::optional<MoleculeId> partner(Kind kind, MoleculeId anchor, Rng& rng);

  const SpatialIndex& index_;
  double r_cell_;
  double negative_max_;
  BucketGrid positive_grid_;
  BucketGrid negative_grid_;
  // 0 unknown, 1 has an eligible partner, 2 has none.
  std::vector<std::uint8_t> status_[2];
  std::size_t exhausted_[2] = {0, 0};
  std::vector<BucketGrid::Range> ranges_;
};

std::vector<LabeledPair> sample_training_pairs(const MoleculeTable& table,
                                               const SpatialIndex& index,
                                               const TrainConfig& config, Rng& rng);

/// Mean BCE over the batch; writes d(mean loss)/d(parameters) into `gradient`
/// (resized to parameter_count()).
double batch_loss_and_gradient(const PairNet& net, const FeatureMatrix& features,
                               std::span<const LabeledPair> batch, std::vector<double>& gradient);

class Adam {
 public:
  Adam(std::size_t parameter_count, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);
  void step(std::span<double> parameters, std::span<const double> gradient);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainResult {
  PairNet net;  // snapshot with the lowest epoch loss
  std::vector<double> loss_history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

TrainResult train(PairNet net, const MoleculeTable& table, const SpatialIndex& index,
                  const FeatureMatrix& features, const TrainConfig& config);

/// Binary layout: "SGPNET01", u64 LE header length, JSON header, then the
/// flat parameter buffer as f64 LE.
void save_network(const std::filesystem::path& path, const PairNet& net, const GenePanel& panel,
                  const TrainConfig& config);
PairNet load_network(const std::filesystem::path& path, const GenePanel* expected_panel = nullptr);

}  // namespace sgseg
