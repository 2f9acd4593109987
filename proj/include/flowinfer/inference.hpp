#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>

#include "flowinfer/adjoint.hpp"
#include "flowinfer/flow_field.hpp"
#include "flowinfer/forward_solver.hpp"

namespace flowinfer {

/// Seeded normal/uniform stream whose full state can be saved and restored.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.normal_ == b.normal_ && a.uniform_ == b.uniform_;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

/// E(k) = E0 sum_{i=0}^{N} (k/k_i)^4 exp(-1.5 (k/k_i)^2) k_i^{-xi}, k_i = sqrt(2)^i.
double kraichnan_energy(double k, double e0, int n, double xi);

struct KraichnanParams {
  double e0 = 1.0;
  int n = 10;
  double xi = 1.5;
  double mean_flow_var = 0.0;
};

/// E0 for which the |k| = 1 components have standard deviation `sigma`.
double kraichnan_e0_for_unit_sigma(double sigma, int n, double xi);

/// Centred Gaussian with diagonal covariance on component coordinates.
/// Components with zero standard deviation are pinned at zero.
class GaussianPrior {
 public:
  GaussianPrior() = default;
  explicit GaussianPrior(Eigen::VectorXd stddev);

  Eigen::Index size() const { return stddev_.size(); }
  const Eigen::VectorXd& stddev() const { return stddev_; }
  Eigen::VectorXd variance() const { return stddev_.array().square(); }
  bool pinned(Eigen::Index i) const { return stddev_[i] == 0.0; }

  /// One standard normal per component in index order, scaled by stddev.
  Eigen::VectorXd sample(Rng& rng) const;
  /// <q, C^{-1} q> over free components.
  double cameron_martin_norm2(const Eigen::VectorXd& q) const;

 private:
  Eigen::VectorXd stddev_;
};

/// Kraichnan-spectrum prior: sigma_l^2 = E(|k_l|) / (2 pi |k_l|) for mode components.
class KraichnanPrior : public GaussianPrior {
 public:
  KraichnanPrior(FlowIndexSet idx, KraichnanParams params);

  const FlowIndexSet& index_set() const { return idx_; }
  const KraichnanParams& params() const { return params_; }

 private:
  static Eigen::VectorXd build(const FlowIndexSet& idx, const KraichnanParams& params);

  FlowIndexSet idx_;
  KraichnanParams params_;
};

DivFreeVelocityField sample_prior(const KraichnanPrior& prior, Rng& rng);

struct NoiseModel {
  double sigma = 1.0;
  void validate() const;
};

struct ObservationSet {
  Eigen::VectorXd y;
  ObservationSpec spec;
};

/// 0.5 sigma^-2 |Y - G(v)|^2.
double potential(const DivFreeVelocityField& field, const ObservationSet& obs, const NoiseModel& noise,
                 const ScalarSpectralField& theta0, const SolverConfig& config);

/// Y = G(v*), optionally plus N(0, sigma^2) noise drawn from `rng`.
ObservationSet generate_data(const DivFreeVelocityField& truth, const ScalarSpectralField& theta0,
                             const ObservationSpec& spec, const NoiseModel& noise, const SolverConfig& config,
                             bool add_noise, Rng& rng);

struct SolveCounters {
  long long forward = 0;
  long long adjoint = 0;
  long long failures = 0;  // proposals auto-rejected for a failed or non-finite evaluation
  SolveCounters& operator+=(const SolveCounters& o) {
    forward += o.forward;
    adjoint += o.adjoint;
    failures += o.failures;
    return *this;
  }
  friend bool operator==(const SolveCounters&, const SolveCounters&) = default;
};

/// Potential Phi on component coordinates, with solve accounting.
class PosteriorModel {
 public:
  virtual ~PosteriorModel() = default;

  virtual Eigen::Index dimension() const = 0;
  /// Phi(q); counts one forward solve.
  virtual double potential(const Eigen::VectorXd& q) = 0;
  /// Phi(q) and DPhi(q); counts one forward and one adjoint solve.
  virtual double potential_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) = 0;

  const SolveCounters& counters() const { return counters_; }
  void set_counters(const SolveCounters& c) { counters_ = c; }
  void note_failure() { ++counters_.failures; }

 protected:
  SolveCounters counters_;
};

/// Phi from the advection-diffusion forward map.
class PdeModel : public PosteriorModel {
 public:
  PdeModel(ForwardProblem problem, FlowIndexSet idx, Eigen::VectorXd y, double sigma);

  Eigen::Index dimension() const override { return static_cast<Eigen::Index>(idx_.component_count()); }
  double potential(const Eigen::VectorXd& q) override;
  double potential_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) override;

  const ForwardProblem& problem() const { return problem_; }
  const FlowIndexSet& index_set() const { return idx_; }
  const Eigen::VectorXd& data() const { return y_; }
  double sigma() const { return sigma_; }
  /// G(q) from the most recent potential evaluation.
  const Eigen::VectorXd& last_prediction() const { return last_g_; }

 private:
  ForwardProblem problem_;
  FlowIndexSet idx_;
  Eigen::VectorXd y_;
  double sigma_;
  Eigen::VectorXd last_g_;
};

/// Phi(q) = 0.5 sigma^-2 |y - M q|^2; with a Gaussian prior the posterior is Gaussian.
class LinearGaussianModel : public PosteriorModel {
 public:
  LinearGaussianModel(Eigen::MatrixXd forward, Eigen::VectorXd y, double sigma);

  Eigen::Index dimension() const override { return forward_.cols(); }
  double potential(const Eigen::VectorXd& q) override;
  double potential_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) override;

  struct Posterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
  };
  Posterior posterior(const GaussianPrior& prior) const;

 private:
  Eigen::MatrixXd forward_;
  Eigen::VectorXd y_;
  double sigma_;
};

}  // namespace flowinfer
