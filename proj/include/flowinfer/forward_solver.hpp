#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "flowinfer/flow_field.hpp"
#include "flowinfer/scalar_field.hpp"

namespace flowinfer {

enum class LinearSolve { automatic, direct, iterative };

struct SolverConfig {
  int scalar_cutoff = 32;
  double dt = 1e-3;
  double kappa = 0.282;
  double t_final = 1.0;
  LinearSolve linear_solve = LinearSolve::automatic;
  double iterative_tolerance = 1e-10;

  /// Number of Crank-Nicolson steps; t_final must be a whole multiple of dt.
  int steps() const;
  void validate() const;
};

struct ObservationPoint {
  double t = 0.0;
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
};

/// Ordered space-time measurement locations; position j defines Y_j.
using ObservationSpec = std::vector<ObservationPoint>;

/// Galerkin generator A of d(theta)/dt = A theta for a fixed velocity field,
/// held in the real layout of a ScalarBasis.
///
/// A_lm = -2 pi i c_{k_l - k_m} . k_m - 4 pi^2 kappa |k_l|^2 delta_lm. Couplings
/// whose target k_l falls outside the basis are dropped.
class Generator {
 public:
  Generator(const DivFreeVelocityField& field, const ScalarBasis& basis, double kappa);

  const ScalarBasis& basis() const { return basis_; }
  double kappa() const { return kappa_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return matrix_; }
  Eigen::Index size() const { return matrix_.rows(); }

  /// Applies A to complex-layout coefficients (matrix-free convolution).
  Eigen::VectorXcd apply(const Eigen::VectorXcd& theta) const;

 private:
  struct FlowTerm {
    WaveVector k;
    Complex amplitude;  // c_k . k_m = amplitude * cross(k, k_m) for k != 0
  };
  Complex advection_rate(const FlowTerm& term, WaveVector km) const;

  ScalarBasis basis_;
  double kappa_;
  Eigen::Vector2d mean_;
  std::vector<FlowTerm> terms_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix_;
};

Generator assemble_generator(const DivFreeVelocityField& field, int scalar_cutoff, double kappa);

/// Prefactored implicit-midpoint step operator for a fixed generator.
///
/// Solves (I - dt/2 A) x = b either by dense LU or by BiCGSTAB with a
/// diagonal preconditioner; one CN step is x_next = 2 (I - dt/2 A)^{-1} x - x.
class CrankNicolsonStepper {
 public:
  CrankNicolsonStepper(const Generator& generator, double dt, LinearSolve mode, int steps_hint,
                       double tolerance = 1e-10);
  ~CrankNicolsonStepper();
  CrankNicolsonStepper(CrankNicolsonStepper&&) noexcept;
  CrankNicolsonStepper& operator=(CrankNicolsonStepper&&) noexcept;

  bool is_direct() const;
  double dt() const { return dt_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Solves (I - dt/2 A)^T x = b, used by the discrete adjoint sweep.
  Eigen::VectorXd solve_transposed(const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd advance(const Eigen::VectorXd& state) const { return 2.0 * solve(state) - state; }

 private:
  struct Impl;
  double dt_;
  std::unique_ptr<Impl> impl_;
};

/// Chooses direct vs iterative from a flop estimate of the whole trajectory.
LinearSolve choose_linear_solve(Eigen::Index size, Eigen::Index nonzeros, int steps);

/// Step CN with a scalar generator lambda: ((1 + dt lambda / 2) / (1 - dt lambda / 2)).
inline Complex crank_nicolson_factor(Complex lambda, double dt) {
  return (1.0 + 0.5 * dt * lambda) / (1.0 - 0.5 * dt * lambda);
}

/// Scalar solution sampled on the uniform grid t_n = n dt, n = 0..steps.
class ScalarTrajectory {
 public:
  ScalarTrajectory(ScalarBasis basis, double dt, Eigen::MatrixXd real_states);

  const ScalarBasis& basis() const { return basis_; }
  int steps() const { return static_cast<int>(states_.cols()) - 1; }
  double dt() const { return dt_; }
  double t_final() const { return dt_ * steps(); }
  std::vector<double> times() const;

  /// Column n holds the real-layout coefficients at t_n.
  const Eigen::MatrixXd& real_states() const { return states_; }
  ScalarSpectralField state(int n) const;

  /// Linear interpolation in time between bracketing grid states.
  double evaluate_point(double t, const Eigen::Vector2d& x) const;

 private:
  ScalarBasis basis_;
  double dt_;
  Eigen::MatrixXd states_;
};

/// Point-evaluation operator O precomputed against a scalar basis and time grid.
class ObservationOperator {
 public:
  ObservationOperator(const ObservationSpec& spec, const ScalarBasis& basis, double dt, int steps);

  std::size_t size() const { return lo_.size(); }
  /// G_j from real-layout states (n x (steps + 1)).
  Eigen::VectorXd apply(const Eigen::MatrixXd& states) const;

  /// Adds weight_j * dG_j/d(theta^n) to column n of `forcing` for every node n,
  /// i.e. the evaluation row split over the two bracketing nodes.
  void accumulate_adjoint_forcing(const Eigen::VectorXd& weights, Eigen::MatrixXd& forcing) const;

  int node_lo(std::size_t j) const { return lo_[j]; }
  double weight_hi(std::size_t j) const { return w_hi_[j]; }

 private:
  std::vector<int> lo_;
  std::vector<double> w_hi_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows_;
};

/// Scalar problem data shared across forward solves: initial condition,
/// observation operator and solver configuration.
class ForwardProblem {
 public:
  ForwardProblem(const ScalarSpectralField& theta0, ObservationSpec spec, SolverConfig config);

  const SolverConfig& config() const { return config_; }
  const ScalarBasis& basis() const { return basis_; }
  const ObservationSpec& spec() const { return spec_; }
  const ObservationOperator& observation() const { return observation_; }
  const Eigen::VectorXd& initial_state() const { return theta0_; }

  CrankNicolsonStepper make_stepper(const DivFreeVelocityField& field) const;
  /// Real-layout states, one column per grid time.
  Eigen::MatrixXd integrate(const CrankNicolsonStepper& stepper) const;
  ScalarTrajectory solve(const DivFreeVelocityField& field) const;
  Eigen::VectorXd forward_map(const DivFreeVelocityField& field) const;

 private:
  SolverConfig config_;
  ScalarBasis basis_;
  ObservationSpec spec_;
  Eigen::VectorXd theta0_;
  ObservationOperator observation_;
};

/// One implicit-midpoint step with an explicit dense generator:
/// solves (I - dt/2 A) x = (I + dt/2 A) state.
Eigen::VectorXcd step_crank_nicolson(const Eigen::VectorXcd& state, const Eigen::MatrixXcd& generator, double dt);

ScalarTrajectory solve_forward(const DivFreeVelocityField& field, const ScalarSpectralField& theta0,
                               const SolverConfig& config);

double evaluate_point(const ScalarTrajectory& traj, double t, const Eigen::Vector2d& x);

Eigen::VectorXd forward_map(const DivFreeVelocityField& field, const ScalarSpectralField& theta0,
                            const ObservationSpec& spec, const SolverConfig& config);

}  // namespace flowinfer
