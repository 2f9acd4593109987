#pragma once

#include <Eigen/Dense>
#include <vector>

#include "flowinfer/flow_field.hpp"
#include "flowinfer/forward_solver.hpp"
#include "flowinfer/scalar_field.hpp"

namespace flowinfer {

/// Point source for the adjoint equation at reversed time `time` = T - t_j.
struct AdjointImpulse {
  double time = 0.0;
  ScalarSpectralField profile{0};  // coefficients exp(-2 pi i k . x_j)
  double weight = 0.0;
};

struct AdjointForcing {
  double t_final = 0.0;
  std::vector<AdjointImpulse> impulses;
};

struct GradientResult {
  RealComponentVector gradient;
  double phi = 0.0;
};

/// Impulses with weight (Y_j - G_j) / sigma^2 for each point observation.
AdjointForcing build_adjoint_forcing(const Eigen::VectorXd& residuals, const ObservationSpec& spec, double sigma,
                                     double t_final, int scalar_cutoff);

/// Backward sweep of the discrete adjoint of the Crank-Nicolson scheme.
///
/// `node_forcing` holds real-layout covectors (column n pairs with theta^n).
/// Returns lambda with P^T lambda^N = f^N and
/// P^T lambda^n = f^n + Q^T lambda^{n+1}, Q = 2I - P, for n = N-1 .. first_node.
/// Columns below first_node are left zero.
Eigen::MatrixXd adjoint_sweep(const CrankNicolsonStepper& stepper, const Eigen::MatrixXd& node_forcing,
                              int first_node = 1);

/// Adjoint variable on the reversed grid: column s is the field-form adjoint
/// state at reversed time s dt (forward node N - s). Zero forcing gives zero.
ScalarTrajectory solve_adjoint(const DivFreeVelocityField& field, const AdjointForcing& forcing,
                               const SolverConfig& config);

/// sum_n (dt/2) lambda^n . dA/dv_c (theta^{n-1} + theta^n) for every component c.
Eigen::VectorXd assemble_gradient(const ScalarBasis& basis, const FlowIndexSet& idx, double dt,
                                  const Eigen::MatrixXd& states, const Eigen::MatrixXd& lambda);

/// Phi and its gradient from one forward and one adjoint solve.
GradientResult gradient_potential(const ForwardProblem& problem, const FlowIndexSet& idx, const Eigen::VectorXd& y,
                                  double sigma, const Eigen::VectorXd& components);

GradientResult gradient_potential(const DivFreeVelocityField& field, const Eigen::VectorXd& y,
                                  const ScalarSpectralField& theta0, const ObservationSpec& spec,
                                  const SolverConfig& config, const FlowIndexSet& idx, double sigma);

double directional_derivative(const ForwardProblem& problem, const FlowIndexSet& idx, const Eigen::VectorXd& y,
                              double sigma, const Eigen::VectorXd& components, const Eigen::VectorXd& direction);

struct GradientCheck {
  Eigen::VectorXd adjoint;
  Eigen::VectorXd finite_difference;
  /// |adjoint - fd| / max(|fd|, floor / tolerance): at most `tolerance` iff the
  /// relative error is within tolerance or the absolute error within `floor`.
  Eigen::VectorXd error;
  double phi = 0.0;
};

/// Adjoint gradient against the 5-point central difference with step h.
GradientCheck check_gradient(const ForwardProblem& problem, const FlowIndexSet& idx, const Eigen::VectorXd& y,
                             double sigma, const Eigen::VectorXd& components, double h, double tolerance = 1e-4,
                             double floor = 1e-8);

}  // namespace flowinfer
