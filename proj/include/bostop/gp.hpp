// Copyright 2026 The bostop Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bostop/detail/bfgs.hpp"
#include "bostop/error.hpp"
#include "bostop/random.hpp"
#include "bostop/space.hpp"

namespace bostop {

/// Hyperparameters of a zero-mean-shifted GP with a Matern 5/2 ARD kernel.
struct KernelParams {
  double signal_variance = 1.0;
  Eigen::VectorXd lengthscales;
  double noise_variance = 1e-6;
  double mean_const = 0.0;

  static KernelParams isotropic(std::size_t dims, double lengthscale, double signal_variance = 1.0,
                                double noise_variance = 1e-6, double mean_const = 0.0) {
    return {signal_variance, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dims), lengthscale),
            noise_variance, mean_const};
  }

  void validate() const {
    if (!(signal_variance > 0.0)) throw InvalidArgument("signal_variance must be > 0");
    if (lengthscales.size() == 0) throw InvalidArgument("lengthscales must be non-empty");
    for (Eigen::Index i = 0; i < lengthscales.size(); ++i) {
      if (!(lengthscales[i] > 0.0)) throw InvalidArgument("lengthscales must be > 0");
    }
    if (!(noise_variance >= 0.0)) throw InvalidArgument("noise_variance must be >= 0");
    if (!std::isfinite(mean_const)) throw InvalidArgument("mean_const must be finite");
  }

  std::size_t dims() const { return static_cast<std::size_t>(lengthscales.size()); }
};

namespace detail {

inline const double kSqrt5 = std::sqrt(5.0);

/// Matern 5/2 correlation as a function of the scaled distance r.
inline double matern52(double r) {
  const double sr = kSqrt5 * r;
  return (1.0 + sr + 5.0 * r * r / 3.0) * std::exp(-sr);
}

inline double scaled_distance(const KernelParams& p, const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b) {
  return ((a - b).array() / p.lengthscales.array()).matrix().norm();
}

inline double kernel(const KernelParams& p, const Eigen::Ref<const Eigen::VectorXd>& a,
                     const Eigen::Ref<const Eigen::VectorXd>& b) {
  return p.signal_variance * matern52(scaled_distance(p, a, b));
}

/// Rows of the returned matrix are the candidates.
inline Eigen::MatrixXd stack(std::span<const Candidate> xs, std::size_t dims) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(dims));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != dims) throw DimensionMismatch(dims, xs[i].size());
    m.row(static_cast<Eigen::Index>(i)) = xs[i].coords().transpose();
  }
  return m;
}

inline Eigen::MatrixXd gram(const KernelParams& p, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = p.signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = K(j, i) = kernel(p, X.row(i).transpose(), X.row(j).transpose());
    }
  }
  return K;
}

/// Cholesky of K + noise I, escalating a diagonal jitter 1e-10 .. 1e-4 (times
/// the mean diagonal) on failure.
inline std::pair<Eigen::LLT<Eigen::MatrixXd>, double> factorize(Eigen::MatrixXd K, double noise) {
  const Eigen::Index n = K.rows();
  K.diagonal().array() += noise;
  const double scale = n > 0 ? K.diagonal().mean() : 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) return {std::move(llt), 0.0};
  for (double jitter = 1e-10; jitter <= 1e-4 * (1.0 + 1e-9); jitter *= 10.0) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter * scale;
    llt.compute(Kj);
    if (llt.info() == Eigen::Success) return {std::move(llt), jitter * scale};
  }
  throw FactorizationFailure("Cholesky failed after exhausting the jitter ladder");
}

}  // namespace detail

/// Matern 5/2 ARD kernel between two candidates.
inline double kernel_eval(const KernelParams& params, const Candidate& a, const Candidate& b) {
  if (a.size() != params.dims()) throw DimensionMismatch(params.dims(), a.size());
  if (b.size() != params.dims()) throw DimensionMismatch(params.dims(), b.size());
  return detail::kernel(params, a.coords(), b.coords());
}

struct FitOptions {
  std::size_t restarts = 5;
  double lengthscale_min = 1e-3, lengthscale_max = 1e3;
  double signal_min = 1e-6, signal_max = 1e3;
  double noise_min = 1e-10, noise_max = 1.0;
  double mean_abs_max = 10.0;
  int max_iters = 200;
  double grad_tol = 1e-6;
  /// Used as the first initialization when set (in original units of y).
  std::optional<KernelParams> warm_start;
};

struct Prediction {
  Eigen::VectorXd means;
  Eigen::VectorXd variances;
};

/// Exact GP posterior conditioned on (X, y). Immutable once built.
class GPPosterior {
 public:
  /// Conditions a GP with fixed hyperparameters on the given data; n may be 0.
  static GPPosterior condition(KernelParams params, std::vector<Candidate> X, Eigen::VectorXd y) {
    params.validate();
    if (X.size() != static_cast<std::size_t>(y.size())) {
      throw LengthMismatch(X.size(), static_cast<std::size_t>(y.size()));
    }
    GPPosterior gp;
    gp.train_X_ = detail::stack(X, params.dims());
    gp.train_points_ = std::move(X);
    gp.train_values_ = std::move(y);
    gp.params_ = std::move(params);
    const Eigen::Index n = gp.train_X_.rows();
    if (n > 0) {
      auto [llt, jitter] =
          detail::factorize(detail::gram(gp.params_, gp.train_X_), gp.params_.noise_variance);
      gp.jitter_ = jitter;
      gp.factor_ = llt.matrixL();
      gp.alpha_ = llt.solve((gp.train_values_.array() - gp.params_.mean_const).matrix());
    }
    return gp;
  }

  const KernelParams& params() const { return params_; }
  const std::vector<Candidate>& train_points() const { return train_points_; }
  const Eigen::VectorXd& train_values() const { return train_values_; }
  /// Lower-triangular L with L L^T = K + (noise + jitter) I.
  const Eigen::MatrixXd& factor() const { return factor_; }
  const Eigen::VectorXd& solved_alpha() const { return alpha_; }
  double jitter() const { return jitter_; }
  std::size_t size() const { return train_points_.size(); }
  std::size_t dims() const { return params_.dims(); }
  bool degenerate() const { return degenerate_; }
  double log_marginal_likelihood() const { return lml_; }

  /// Posterior mean and unclamped variance of the latent function at x.
  std::pair<double, double> predict_raw(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::Index n = train_X_.rows();
    if (n == 0) return {params_.mean_const, params_.signal_variance};
    Eigen::VectorXd kx(n);
    for (Eigen::Index i = 0; i < n; ++i) kx[i] = detail::kernel(params_, train_X_.row(i).transpose(), x);
    const double mean = params_.mean_const + kx.dot(alpha_);
    factor_.triangularView<Eigen::Lower>().solveInPlace(kx);
    return {mean, params_.signal_variance - kx.squaredNorm()};
  }

  std::pair<double, double> predict_one(const Candidate& q) const {
    if (q.size() != dims()) throw DimensionMismatch(dims(), q.size());
    auto [m, v] = predict_raw(q.coords());
    return {m, v > 0.0 ? v : 0.0};
  }

 private:
  friend GPPosterior fit(const SearchSpace&, std::vector<Candidate>, const Eigen::VectorXd&,
                         const FitOptions&, Rng&);

  KernelParams params_;
  std::vector<Candidate> train_points_;
  Eigen::MatrixXd train_X_;
  Eigen::VectorXd train_values_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  bool degenerate_ = false;
  double lml_ = std::numeric_limits<double>::quiet_NaN();
};

/// Posterior means and variances (clamped at 0) for each query.
inline Prediction predict(const GPPosterior& gp, std::span<const Candidate> queries) {
  Prediction out{Eigen::VectorXd(static_cast<Eigen::Index>(queries.size())),
                 Eigen::VectorXd(static_cast<Eigen::Index>(queries.size()))};
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto [m, v] = gp.predict_one(queries[i]);
    out.means[static_cast<Eigen::Index>(i)] = m;
    out.variances[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Log marginal likelihood and its gradient.
//
// The gradient is taken with respect to the packed vector
//   [log lengthscale_1 .. log lengthscale_d, log signal_variance, log noise_variance, mean_const]

inline Eigen::VectorXd pack_log_params(const KernelParams& p) {
  const Eigen::Index d = p.lengthscales.size();
  Eigen::VectorXd theta(d + 3);
  theta.head(d) = p.lengthscales.array().log();
  theta[d] = std::log(p.signal_variance);
  theta[d + 1] = std::log(p.noise_variance);
  theta[d + 2] = p.mean_const;
  return theta;
}

inline KernelParams unpack_log_params(const Eigen::VectorXd& theta) {
  const Eigen::Index d = theta.size() - 3;
  KernelParams p;
  p.lengthscales = theta.head(d).array().exp();
  p.signal_variance = std::exp(theta[d]);
  p.noise_variance = std::exp(theta[d + 1]);
  p.mean_const = theta[d + 2];
  return p;
}

struct LmlValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

namespace detail {

/// Per-dimension squared coordinate differences, reused across likelihood
/// evaluations on the same inputs.
struct PairwiseDiffs {
  std::vector<Eigen::MatrixXd> sq;  // one n x n matrix per dimension

  explicit PairwiseDiffs(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    sq.resize(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
      auto& m = sq[static_cast<std::size_t>(k)];
      m.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double diff = X(i, k) - X(j, k);
          m(i, j) = diff * diff;
        }
      }
    }
  }
};

inline LmlValue lml_impl(const KernelParams& p, const PairwiseDiffs& diffs, const Eigen::VectorXd& y,
                         bool want_gradient) {
  const Eigen::Index n = y.size();
  const Eigen::Index d = p.lengthscales.size();
  const Eigen::Index n_dims = static_cast<Eigen::Index>(diffs.sq.size());
  if (n_dims != d) throw DimensionMismatch(static_cast<std::size_t>(d), diffs.sq.size());

  // scaled squared distances
  Eigen::MatrixXd r2 = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < d; ++k) {
    r2 += diffs.sq[static_cast<std::size_t>(k)] / (p.lengthscales[k] * p.lengthscales[k]);
  }
  const Eigen::ArrayXXd r = r2.array().sqrt();
  const Eigen::ArrayXXd e = (-kSqrt5 * r).exp();
  const Eigen::MatrixXd K = (p.signal_variance * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2.array()) * e).matrix();

  auto [llt, jitter] = factorize(K, p.noise_variance);
  const Eigen::VectorXd centered = (y.array() - p.mean_const).matrix();
  const Eigen::VectorXd alpha = llt.solve(centered);
  const Eigen::MatrixXd& L = llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(L(i, i));

  LmlValue out;
  out.value = -0.5 * centered.dot(alpha) - 0.5 * log_det -
              0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  if (!want_gradient) return out;

  const Eigen::MatrixXd Kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv;
  out.gradient.resize(d + 3);
  // dK/dlog l_k = s2 * 5/3 * (1 + sqrt5 r) e^{-sqrt5 r} * diff_k^2 / l_k^2
  const Eigen::ArrayXXd common = p.signal_variance * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * e;
  const Eigen::ArrayXXd WC = W.array() * common;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double inv_l2 = 1.0 / (p.lengthscales[k] * p.lengthscales[k]);
    out.gradient[k] = 0.5 * (WC * diffs.sq[static_cast<std::size_t>(k)].array()).sum() * inv_l2;
  }
  out.gradient[d] = 0.5 * (W.array() * K.array()).sum();
  out.gradient[d + 1] = 0.5 * p.noise_variance * W.trace();
  out.gradient[d + 2] = alpha.sum();
  (void)jitter;
  return out;
}

}  // namespace detail

/// Gaussian log marginal likelihood of y (centred by mean_const) under params.
inline double log_marginal_likelihood(const KernelParams& params, std::span<const Candidate> X,
                                      const Eigen::VectorXd& y) {
  params.validate();
  if (X.size() != static_cast<std::size_t>(y.size())) {
    throw LengthMismatch(X.size(), static_cast<std::size_t>(y.size()));
  }
  detail::PairwiseDiffs diffs(detail::stack(X, params.dims()));
  return detail::lml_impl(params, diffs, y, false).value;
}

/// Value and gradient with respect to the packed log-parameters (see pack_log_params).
inline LmlValue log_marginal_likelihood_with_gradient(const KernelParams& params,
                                                      std::span<const Candidate> X,
                                                      const Eigen::VectorXd& y) {
  params.validate();
  if (X.size() != static_cast<std::size_t>(y.size())) {
    throw LengthMismatch(X.size(), static_cast<std::size_t>(y.size()));
  }
  detail::PairwiseDiffs diffs(detail::stack(X, params.dims()));
  return detail::lml_impl(params, diffs, y, true);
}

// ---------------------------------------------------------------------------
// Type-II maximum likelihood fitting.


/// Fits hyperparameters by maximizing the log marginal likelihood over
/// `restarts` initializations, each refined by box-constrained BFGS in
/// log-parameter space. y is standardized internally; the returned posterior
/// is expressed in the original units.
inline GPPosterior fit(const SearchSpace& space, std::vector<Candidate> X, const Eigen::VectorXd& y,
                       const FitOptions& opt, Rng& rng) {
  if (X.size() != static_cast<std::size_t>(y.size())) {
    throw LengthMismatch(X.size(), static_cast<std::size_t>(y.size()));
  }
  if (X.size() < 2) throw InvalidArgument("fit needs at least 2 observations");
  if (!y.allFinite()) throw InvalidArgument("fit: y must be finite");
  if (opt.restarts == 0) throw InvalidArgument("fit: restarts must be >= 1");
  const std::size_t d = space.size();
  const Eigen::Index di = static_cast<Eigen::Index>(d);

  const double y_mean = y.mean();
  const double y_std = std::sqrt((y.array() - y_mean).square().mean());

  if (y_std == 0.0 || !(y_std > 1e-300)) {
    // Degenerate data: a flat model at the constant with a floored signal.
    // The prior is used unconditioned, so mean and variance are the same everywhere.
    KernelParams flat = KernelParams::isotropic(d, 1.0, 1e-12, 1e-12, y[0]);
    GPPosterior gp = GPPosterior::condition(std::move(flat), {}, Eigen::VectorXd(0));
    gp.train_points_ = std::move(X);
    gp.train_values_ = y;
    gp.degenerate_ = true;
    return gp;
  }

  const Eigen::VectorXd ys = ((y.array() - y_mean) / y_std).matrix();
  detail::PairwiseDiffs diffs(detail::stack(X, d));

  Eigen::VectorXd lower(di + 3), upper(di + 3);
  lower.head(di).setConstant(std::log(opt.lengthscale_min));
  upper.head(di).setConstant(std::log(opt.lengthscale_max));
  lower[di] = std::log(opt.signal_min);
  upper[di] = std::log(opt.signal_max);
  lower[di + 1] = std::log(opt.noise_min);
  upper[di + 1] = std::log(opt.noise_max);
  lower[di + 2] = -opt.mean_abs_max;
  upper[di + 2] = opt.mean_abs_max;

  auto neg_lml = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    const LmlValue v = detail::lml_impl(unpack_log_params(theta), diffs, ys, true);
    grad = -v.gradient;
    return -v.value;
  };

  // Initializations: index 0 is the warm start (or a fixed default), the rest
  // are drawn from a moderate sub-box. Draws are consumed even when unused so
  // the stream advances identically.
  std::vector<Eigen::VectorXd> inits;
  {
    KernelParams p0 = KernelParams::isotropic(d, 0.3, 1.0, 1e-3, 0.0);
    if (opt.warm_start && opt.warm_start->dims() == d) {
      const KernelParams& w = *opt.warm_start;
      p0.lengthscales = w.lengthscales;
      p0.signal_variance = w.signal_variance / (y_std * y_std);
      p0.noise_variance = std::max(w.noise_variance / (y_std * y_std), opt.noise_min);
      p0.mean_const = (w.mean_const - y_mean) / y_std;
    }
    inits.push_back(pack_log_params(p0).cwiseMax(lower).cwiseMin(upper));
  }
  for (std::size_t r = 1; r < opt.restarts; ++r) {
    Eigen::VectorXd theta(di + 3);
    for (Eigen::Index k = 0; k < di; ++k) {
      theta[k] = std::log(0.05) + uniform01(rng) * (std::log(2.0) - std::log(0.05));
    }
    theta[di] = std::log(0.2) + uniform01(rng) * (std::log(5.0) - std::log(0.2));
    theta[di + 1] = std::log(1e-6) + uniform01(rng) * (std::log(1e-1) - std::log(1e-6));
    theta[di + 2] = -0.5 + uniform01(rng);
    inits.push_back(theta.cwiseMax(lower).cwiseMin(upper));
  }

  detail::BfgsOptions bopt;
  bopt.max_iters = opt.max_iters;
  bopt.grad_tol = opt.grad_tol;
  std::optional<detail::BfgsResult> best;
  for (const auto& init : inits) {
    detail::BfgsResult res = detail::minimize_bfgs_box(neg_lml, init, lower, upper, bopt);
    if (std::isfinite(res.value) && (!best || res.value < best->value)) best = std::move(res);
  }
  if (!best) throw FactorizationFailure("fit: no restart produced a finite likelihood");

  KernelParams p = unpack_log_params(best->x);
  p.signal_variance *= y_std * y_std;
  p.noise_variance *= y_std * y_std;
  p.mean_const = p.mean_const * y_std + y_mean;
  GPPosterior gp = GPPosterior::condition(std::move(p), std::move(X), y);
  gp.lml_ = -best->value - static_cast<double>(y.size()) * std::log(y_std);
  return gp;
}

inline GPPosterior fit(const SearchSpace& space, std::vector<Candidate> X, const Eigen::VectorXd& y,
                       std::size_t restarts, Rng& rng) {
  FitOptions opt;
  opt.restarts = restarts;
  return fit(space, std::move(X), y, opt, rng);
}

}  // namespace bostop
