#include "sgseg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgseg/error.hpp"

namespace sgseg {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_density(const GaussianComponent& c, double x) {
  if (c.weight <= 0.0) return -INFINITY;
  const double d = x - c.mean;
  return std::log(c.weight) - kLogSqrt2Pi - 0.5 * std::log(c.variance) - 0.5 * d * d / c.variance;
}

double log_add(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double Gmm1D::responsibility_high(double x) const {
  const double a = log_density(low, x);
  const double b = log_density(high, x);
  const double total = log_add(a, b);
  return total == -INFINITY ? 0.0 : std::exp(b - total);
}

double gmm_log_likelihood(const Gmm1D& model, std::span<const double> values) {
  double ll = 0.0;
  for (double x : values) ll += log_add(log_density(model.low, x), log_density(model.high, x));
  return ll;
}

Gmm1D gmm_fit_1d(std::span<const double> values, const GmmOptions& options) {
  const std::size_t n = values.size();
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "mixture fit needs at least 4 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    throw Error(ErrorCode::DegenerateData, "all values are equal; mixture is undefined");
  }
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  double total_var = 0.0;
  for (double x : sorted) total_var += (x - mean) * (x - mean);
  total_var /= static_cast<double>(n);
  const double var_floor = 1e-6 * total_var;

  // Pooled variance of the two halves around their own means.
  const std::size_t half = n / 2;
  auto ss = [&](std::size_t b, std::size_t e) {
    const double m = std::accumulate(sorted.begin() + b, sorted.begin() + e, 0.0) / static_cast<double>(e - b);
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += (sorted[i] - m) * (sorted[i] - m);
    return s;
  };
  double pooled = (ss(0, half) + ss(half, n)) / static_cast<double>(n);
  if (!(pooled > var_floor)) pooled = total_var;

  Gmm1D model;
  model.low = {quantile(sorted, 0.25), pooled, 0.5};
  model.high = {quantile(sorted, 0.75), pooled, 0.5};

  std::vector<double> resp(n);
  auto e_step = [&] {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = log_density(model.low, values[i]);
      const double b = log_density(model.high, values[i]);
      const double t = log_add(a, b);
      ll += t;
      resp[i] = std::exp(b - t);
    }
    return ll;
  };

  double ll = e_step();
  model.log_likelihood.push_back(ll);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    double n_high = 0.0, sum_high = 0.0, sum_low = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n_high += resp[i];
      sum_high += resp[i] * values[i];
      sum_low += (1.0 - resp[i]) * values[i];
    }
    const double n_low = static_cast<double>(n) - n_high;
    auto update = [&](GaussianComponent& c, double nk, double sum, bool high) {
      c.weight = nk / static_cast<double>(n);
      if (nk <= 0.0) return;
      c.mean = sum / nk;
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = high ? resp[i] : 1.0 - resp[i];
        sq += r * (values[i] - c.mean) * (values[i] - c.mean);
      }
      c.variance = std::max(sq / nk, var_floor);
    };
    update(model.low, n_low, sum_low, false);
    update(model.high, n_high, sum_high, true);
    ++model.iterations;

    const double next = e_step();
    model.log_likelihood.push_back(next);
    const bool converged = next - ll < options.tolerance;
    ll = next;
    if (converged) break;
  }
  if (model.low.mean > model.high.mean) std::swap(model.low, model.high);
  return model;
}

}  // namespace sgseg
