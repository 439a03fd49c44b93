#pragma once

#include <span>
#include <vector>

namespace sgseg {

struct GaussianComponent {
  double mean = 0.0;
  double variance = 1.0;
  double weight = 0.5;
};

/// Two-component 1D Gaussian mixture; `low` has the smaller mean.
struct Gmm1D {
  GaussianComponent low;
  GaussianComponent high;
  /// Total log-likelihood of the data before the first and after every EM step.
  std::vector<double> log_likelihood;
  std::size_t iterations = 0;

  /// Posterior probability that x came from the larger-mean component.
  double responsibility_high(double x) const;
};

struct GmmOptions {
  double tolerance = 1e-6;
  std::size_t max_iterations = 200;
};

/// EM fit initialised at the 25th/75th percentiles with the pooled
/// within-half variance and equal weights. Throws DegenerateData when all
/// values are equal, InvalidArgument for fewer than 4 values.
Gmm1D gmm_fit_1d(std::span<const double> values, const GmmOptions& options = {});

/// Total log-likelihood of values under the mixture.
double gmm_log_likelihood(const Gmm1D& model, std::span<const double> values);

}  // namespace sgseg
