#include "flowinfer/inference.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "flowinfer/errors.hpp"

namespace flowinfer {

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_ << ' ' << normal_ << ' ' << uniform_;
  return out.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng rng;
  std::istringstream in(text);
  in >> rng.engine_ >> rng.normal_ >> rng.uniform_;
  if (!in) throw IoError("malformed random-number state");
  return rng;
}

double kraichnan_energy(double k, double e0, int n, double xi) {
  if (!(k > 0.0)) throw InvalidArgument("wave number must be positive");
  if (n < 0) throw InvalidArgument("subfield count must be nonnegative");
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double ki = std::pow(std::numbers::sqrt2, i);
    const double r = k / ki;
    sum += r * r * r * r * std::exp(-1.5 * r * r) * std::pow(ki, -xi);
  }
  return e0 * sum;
}

double kraichnan_e0_for_unit_sigma(double sigma, int n, double xi) {
  // sigma^2 = E(1) / (2 pi) with E linear in E0.
  return sigma * sigma * 2.0 * std::numbers::pi / kraichnan_energy(1.0, 1.0, n, xi);
}

GaussianPrior::GaussianPrior(Eigen::VectorXd stddev) : stddev_(std::move(stddev)) {
  if ((stddev_.array() < 0.0).any() || !stddev_.allFinite()) {
    throw InvalidArgument("prior standard deviations must be finite and nonnegative");
  }
}

Eigen::VectorXd GaussianPrior::sample(Rng& rng) const {
  Eigen::VectorXd x(stddev_.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = stddev_[i] * rng.normal();
  return x;
}

double GaussianPrior::cameron_martin_norm2(const Eigen::VectorXd& q) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (stddev_[i] > 0.0) s += q[i] * q[i] / (stddev_[i] * stddev_[i]);
  }
  return s;
}

KraichnanPrior::KraichnanPrior(FlowIndexSet idx, KraichnanParams params)
    : GaussianPrior(build(idx, params)), idx_(std::move(idx)), params_(params) {}

Eigen::VectorXd KraichnanPrior::build(const FlowIndexSet& idx, const KraichnanParams& params) {
  if (params.e0 < 0.0) throw InvalidArgument("e0 must be nonnegative");
  if (params.mean_flow_var < 0.0) throw InvalidArgument("mean-flow variance must be nonnegative");
  Eigen::VectorXd sd(static_cast<Eigen::Index>(idx.component_count()));
  sd[0] = sd[1] = std::sqrt(params.mean_flow_var);
  const auto& reps = idx.representatives();
  for (std::size_t j = 0; j < reps.size(); ++j) {
    const double k = reps[j].norm();
    const double var = kraichnan_energy(k, params.e0, params.n, params.xi) / (2.0 * std::numbers::pi * k);
    sd[static_cast<Eigen::Index>(2 + 2 * j)] = sd[static_cast<Eigen::Index>(3 + 2 * j)] = std::sqrt(var);
  }
  return sd;
}

DivFreeVelocityField sample_prior(const KraichnanPrior& prior, Rng& rng) {
  return from_components(prior.sample(rng), prior.index_set());
}

void NoiseModel::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("noise sigma must be positive");
}

double potential(const DivFreeVelocityField& field, const ObservationSet& obs, const NoiseModel& noise,
                 const ScalarSpectralField& theta0, const SolverConfig& config) {
  noise.validate();
  if (static_cast<std::size_t>(obs.y.size()) != obs.spec.size()) {
    throw IndexMismatch("data length does not match observation count");
  }
  const Eigen::VectorXd g = forward_map(field, theta0, obs.spec, config);
  return 0.5 * (obs.y - g).squaredNorm() / (noise.sigma * noise.sigma);
}

ObservationSet generate_data(const DivFreeVelocityField& truth, const ScalarSpectralField& theta0,
                             const ObservationSpec& spec, const NoiseModel& noise, const SolverConfig& config,
                             bool add_noise, Rng& rng) {
  ObservationSet out{forward_map(truth, theta0, spec, config), spec};
  if (add_noise) {
    noise.validate();
    for (Eigen::Index j = 0; j < out.y.size(); ++j) out.y[j] += noise.sigma * rng.normal();
  }
  return out;
}

PdeModel::PdeModel(ForwardProblem problem, FlowIndexSet idx, Eigen::VectorXd y, double sigma)
    : problem_(std::move(problem)), idx_(std::move(idx)), y_(std::move(y)), sigma_(sigma) {
  if (!(sigma_ > 0.0)) throw InvalidArgument("noise sigma must be positive");
  if (static_cast<std::size_t>(y_.size()) != problem_.observation().size()) {
    throw IndexMismatch("data length does not match observation count");
  }
}

double PdeModel::potential(const Eigen::VectorXd& q) {
  ++counters_.forward;
  if (y_.size() == 0) return 0.0;
  last_g_ = problem_.forward_map(from_components(q, idx_));
  return 0.5 * (y_ - last_g_).squaredNorm() / (sigma_ * sigma_);
}

double PdeModel::potential_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
  ++counters_.forward;
  ++counters_.adjoint;
  if (y_.size() == 0) {
    grad = Eigen::VectorXd::Zero(q.size());
    return 0.0;
  }
  GradientResult r = gradient_potential(problem_, idx_, y_, sigma_, q);
  grad = std::move(r.gradient.values);
  return r.phi;
}

LinearGaussianModel::LinearGaussianModel(Eigen::MatrixXd forward, Eigen::VectorXd y, double sigma)
    : forward_(std::move(forward)), y_(std::move(y)), sigma_(sigma) {
  if (!(sigma_ > 0.0)) throw InvalidArgument("noise sigma must be positive");
  if (forward_.rows() != y_.size()) throw IndexMismatch("forward matrix rows must match data length");
}

double LinearGaussianModel::potential(const Eigen::VectorXd& q) {
  ++counters_.forward;
  return 0.5 * (y_ - forward_ * q).squaredNorm() / (sigma_ * sigma_);
}

double LinearGaussianModel::potential_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
  ++counters_.forward;
  ++counters_.adjoint;
  const Eigen::VectorXd r = y_ - forward_ * q;
  grad = -forward_.transpose() * r / (sigma_ * sigma_);
  return 0.5 * r.squaredNorm() / (sigma_ * sigma_);
}

LinearGaussianModel::Posterior LinearGaussianModel::posterior(const GaussianPrior& prior) const {
  if (prior.size() != dimension()) throw IndexMismatch("prior dimension does not match model");
  if ((prior.stddev().array() == 0.0).any()) throw InvalidArgument("analytic posterior needs a nondegenerate prior");
  const double inv_var = 1.0 / (sigma_ * sigma_);
  Eigen::MatrixXd precision = inv_var * forward_.transpose() * forward_;
  precision.diagonal() += prior.variance().cwiseInverse();
  Posterior p;
  p.covariance = precision.inverse();
  p.mean = p.covariance * (inv_var * forward_.transpose() * y_);
  return p;
}

}  // namespace flowinfer
