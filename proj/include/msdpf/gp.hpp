#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msdpf/models.hpp"

namespace msdpf {

enum class KernelKind { gaussian, matern52 };

struct KernelConfig {
  KernelKind kind = KernelKind::gaussian;
  // Diagonal of Sigma is length_scales^2.
  std::vector<double> length_scales{0.1};
  double signal_variance = 1.0;
  double noise_variance = 0.0;

  void validate() const {
    if (length_scales.empty()) throw std::invalid_argument("KernelConfig: no length scales");
    for (double l : length_scales)
      if (!(l > 0.0)) throw std::invalid_argument("KernelConfig: length scales must be positive");
    if (!(signal_variance > 0.0)) throw std::invalid_argument("KernelConfig: signal variance must be positive");
    if (!(noise_variance >= 0.0)) throw std::invalid_argument("KernelConfig: noise variance must be >= 0");
  }
};

inline double kernel_eval(const KernelConfig& cfg, std::span<const double> a, std::span<const double> b) {
  if (a.size() != cfg.length_scales.size() || b.size() != cfg.length_scales.size())
    throw std::invalid_argument("kernel_eval: dimension does not match length scales");
  double r2 = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double z = (a[d] - b[d]) / cfg.length_scales[d];
    r2 += z * z;
  }
  switch (cfg.kind) {
    case KernelKind::gaussian:
      return cfg.signal_variance * std::exp(-0.5 * r2);
    case KernelKind::matern52: {
      const double r = std::sqrt(5.0 * r2);
      return cfg.signal_variance * (1.0 + r + r * r / 3.0) * std::exp(-r);
    }
  }
  return 0.0;
}

struct GpDataset {
  std::vector<Param> points;
  std::vector<double> values;
  KernelConfig kernel;
  double mean = 0.0;  // constant prior mean

  std::size_t size() const { return points.size(); }

  void add(Param p, double v) {
    points.push_back(std::move(p));
    values.push_back(v);
  }
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

class GpNumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Factorized GP posterior. Rebuild after the dataset changes.
class GpPosterior {
 public:
  // Jitter is only added when the plain factorization fails; it starts at
  // kInitialJitter * signal_variance and grows tenfold per retry.
  static constexpr double kInitialJitter = 1e-10;
  static constexpr int kMaxJitterEscalations = 6;

  explicit GpPosterior(const GpDataset& data) : data_(data) {
    data_.kernel.validate();
    if (data_.points.size() != data_.values.size())
      throw std::invalid_argument("GpPosterior: points and values differ in length");
    for (std::size_t i = 0; i < data_.size(); ++i) {
      bool finite = std::isfinite(data_.values[i]);
      for (double x : data_.points[i]) finite = finite && std::isfinite(x);
      if (!finite) throw std::invalid_argument("GpPosterior: non-finite training point or value");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(data_.size());
    if (n == 0) return;

    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double v = kernel_eval(data_.kernel, data_.points[i], data_.points[j]);
        gram(i, j) = v;
        gram(j, i) = v;
      }
    }
    double jitter = 0.0;
    for (int attempt = 0;; ++attempt) {
      Eigen::MatrixXd a = gram;
      a.diagonal().array() += data_.kernel.noise_variance + jitter;
      llt_.compute(a);
      if (llt_.info() == Eigen::Success) break;
      if (attempt == kMaxJitterEscalations + 1)
        throw GpNumericalError("GpPosterior: Gram matrix not positive definite after jitter " +
                               std::to_string(jitter));
      jitter = attempt == 0 ? kInitialJitter * data_.kernel.signal_variance : jitter * 10.0;
    }
    jitter_ = jitter;

    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i) resid[i] = data_.values[i] - data_.mean;
    alpha_ = llt_.solve(resid);
  }

  GpPrediction predict(std::span<const double> query) const {
    const double prior_var = kernel_eval(data_.kernel, query, query);
    const Eigen::Index n = static_cast<Eigen::Index>(data_.size());
    if (n == 0) return {data_.mean, prior_var};
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_eval(data_.kernel, data_.points[i], query);
    const double mean = data_.mean + k.dot(alpha_);
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    return {mean, std::max(0.0, prior_var - v.squaredNorm())};
  }

  double jitter() const { return jitter_; }
  const GpDataset& data() const { return data_; }

 private:
  GpDataset data_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

inline GpPrediction gp_posterior(const GpDataset& data, std::span<const double> query) {
  return GpPosterior(data).predict(query);
}

}  // namespace msdpf
