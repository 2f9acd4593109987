#include "flowinfer/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowinfer/errors.hpp"

namespace flowinfer {

namespace {

constexpr double kPi = std::numbers::pi;

// Real-layout covector -> complex vector z with  cov . y = sum_k conj(z_k) y_k.
Eigen::VectorXcd covector_to_complex(const ScalarBasis& basis, const Eigen::VectorXd& cov) {
  Eigen::VectorXd halved = 0.5 * cov;
  halved[0] = cov[0];
  return basis.to_complex(halved);
}

Eigen::VectorXd profile_to_covector(const ScalarBasis& basis, const ScalarSpectralField& profile) {
  Eigen::VectorXd cov = 2.0 * basis.to_real(profile.resized(basis.cutoff()).coeffs());
  cov[0] *= 0.5;
  return cov;
}

}  // namespace

AdjointForcing build_adjoint_forcing(const Eigen::VectorXd& residuals, const ObservationSpec& spec, double sigma,
                                     double t_final, int scalar_cutoff) {
  if (!(sigma > 0.0)) throw InvalidArgument("noise sigma must be positive");
  if (static_cast<std::size_t>(residuals.size()) != spec.size()) {
    throw IndexMismatch("residual count does not match observation count");
  }
  AdjointForcing forcing;
  forcing.t_final = t_final;
  const double inv_var = 1.0 / (sigma * sigma);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    ScalarSpectralField profile(scalar_cutoff);
    for (int kx = -scalar_cutoff; kx <= scalar_cutoff; ++kx) {
      for (int ky = -scalar_cutoff; ky <= scalar_cutoff; ++ky) {
        profile.set({kx, ky}, std::polar(1.0, -2.0 * kPi * (kx * spec[j].x[0] + ky * spec[j].x[1])));
      }
    }
    forcing.impulses.push_back(
        {t_final - spec[j].t, std::move(profile), inv_var * residuals[static_cast<Eigen::Index>(j)]});
  }
  return forcing;
}

Eigen::MatrixXd adjoint_sweep(const CrankNicolsonStepper& stepper, const Eigen::MatrixXd& node_forcing,
                              int first_node) {
  const auto last = static_cast<int>(node_forcing.cols()) - 1;
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(node_forcing.rows(), node_forcing.cols());
  if (last < first_node) return lambda;
  Eigen::VectorXd rhs = node_forcing.col(last);
  for (int n = last; n >= first_node; --n) {
    lambda.col(n) = stepper.solve_transposed(rhs);
    if (n > first_node) rhs = node_forcing.col(n - 1) + 2.0 * lambda.col(n) - rhs;
  }
  return lambda;
}

ScalarTrajectory solve_adjoint(const DivFreeVelocityField& field, const AdjointForcing& forcing,
                               const SolverConfig& config) {
  config.validate();
  const ScalarBasis basis(config.scalar_cutoff);
  const int steps = config.steps();
  Eigen::MatrixXd node_forcing = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(basis.size()), steps + 1);
  for (std::size_t j = 0; j < forcing.impulses.size(); ++j) {
    const auto& imp = forcing.impulses[j];
    // Impulses are placed by time alone; the profile is added directly below.
    const ObservationOperator single({{config.t_final - imp.time, Eigen::Vector2d::Zero()}}, basis, config.dt,
                                     steps);
    const Eigen::VectorXd cov = imp.weight * profile_to_covector(basis, imp.profile);
    const int lo = single.node_lo(0);
    const double w = single.weight_hi(0);
    node_forcing.col(lo) += (1.0 - w) * cov;
    if (w > 0.0) node_forcing.col(lo + 1) += w * cov;
  }
  const CrankNicolsonStepper stepper(Generator(field, basis, config.kappa), config.dt, config.linear_solve, steps,
                                     config.iterative_tolerance);
  const Eigen::MatrixXd lambda = adjoint_sweep(stepper, node_forcing, 0);
  Eigen::MatrixXd reversed(lambda.rows(), lambda.cols());
  for (int s = 0; s <= steps; ++s) {
    reversed.col(s) = basis.to_real(covector_to_complex(basis, lambda.col(steps - s)));
  }
  return ScalarTrajectory(basis, config.dt, std::move(reversed));
}

Eigen::VectorXd assemble_gradient(const ScalarBasis& basis, const FlowIndexSet& idx, double dt,
                                  const Eigen::MatrixXd& states, const Eigen::MatrixXd& lambda) {
  const int side = basis.side();
  const int m = basis.cutoff();
  const auto& reps = idx.representatives();
  // Shift 0 is the mean flow; shift j + 1 is representative j.
  std::vector<WaveVector> shifts{{0, 0}};
  shifts.insert(shifts.end(), reps.begin(), reps.end());
  std::vector<Eigen::Vector2cd> w(shifts.size(), Eigen::Vector2cd::Zero());

  for (Eigen::Index n = 1; n < states.cols(); ++n) {
    const Eigen::VectorXcd lam = covector_to_complex(basis, lambda.col(n));
    const Eigen::VectorXcd u = basis.to_complex(states.col(n - 1) + states.col(n));
    for (std::size_t s = 0; s < shifts.size(); ++s) {
      const WaveVector q = shifts[s];
      Complex wx{}, wy{};
      for (int a = std::max(0, -q.kx); a < std::min(side, side - q.kx); ++a) {
        const int kx = a - m;
        for (int b = std::max(0, -q.ky); b < std::min(side, side - q.ky); ++b) {
          const int src = a * side + b;
          const Complex prod = std::conj(lam[src + q.kx * side + q.ky]) * u[src];
          wx += static_cast<double>(kx) * prod;
          wy += static_cast<double>(b - m) * prod;
        }
      }
      w[s] += Eigen::Vector2cd(wx, wy);
    }
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.component_count()));
  grad[0] = kPi * dt * w[0][0].imag();
  grad[1] = kPi * dt * w[0][1].imag();
  for (std::size_t j = 0; j < reps.size(); ++j) {
    const WaveVector p = reps[j].perp();
    const double inv = 0.5 / reps[j].norm();
    const Complex dot_a = inv * (static_cast<double>(p.kx) * w[j + 1][0] + static_cast<double>(p.ky) * w[j + 1][1]);
    // dv/da = 1/2, dv/db = -i/2, so Im(-i z) = -Re(z).
    grad[static_cast<Eigen::Index>(2 + 2 * j)] = 2.0 * kPi * dt * dot_a.imag();
    grad[static_cast<Eigen::Index>(3 + 2 * j)] = -2.0 * kPi * dt * dot_a.real();
  }
  return grad;
}

GradientResult gradient_potential(const ForwardProblem& problem, const FlowIndexSet& idx, const Eigen::VectorXd& y,
                                  double sigma, const Eigen::VectorXd& components) {
  if (!(sigma > 0.0)) throw InvalidArgument("noise sigma must be positive");
  if (static_cast<std::size_t>(y.size()) != problem.observation().size()) {
    throw IndexMismatch("data length does not match observation count");
  }
  const DivFreeVelocityField field = from_components(components, idx);
  const CrankNicolsonStepper stepper = problem.make_stepper(field);
  const Eigen::MatrixXd states = problem.integrate(stepper);
  const Eigen::VectorXd residual = y - problem.observation().apply(states);
  const double inv_var = 1.0 / (sigma * sigma);

  Eigen::MatrixXd forcing = Eigen::MatrixXd::Zero(states.rows(), states.cols());
  problem.observation().accumulate_adjoint_forcing(-inv_var * residual, forcing);
  const Eigen::MatrixXd lambda = adjoint_sweep(stepper, forcing);

  GradientResult out;
  out.phi = 0.5 * inv_var * residual.squaredNorm();
  out.gradient.values = assemble_gradient(problem.basis(), idx, problem.config().dt, states, lambda);
  return out;
}

GradientResult gradient_potential(const DivFreeVelocityField& field, const Eigen::VectorXd& y,
                                  const ScalarSpectralField& theta0, const ObservationSpec& spec,
                                  const SolverConfig& config, const FlowIndexSet& idx, double sigma) {
  const ForwardProblem problem(theta0, spec, config);
  return gradient_potential(problem, idx, y, sigma, to_components(field, idx).values);
}

double directional_derivative(const ForwardProblem& problem, const FlowIndexSet& idx, const Eigen::VectorXd& y,
                              double sigma, const Eigen::VectorXd& components, const Eigen::VectorXd& direction) {
  if (direction.size() != components.size()) throw IndexMismatch("direction length does not match components");
  return gradient_potential(problem, idx, y, sigma, components).gradient.values.dot(direction);
}

GradientCheck check_gradient(const ForwardProblem& problem, const FlowIndexSet& idx, const Eigen::VectorXd& y,
                             double sigma, const Eigen::VectorXd& components, double h, double tolerance,
                             double floor) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  if (!(tolerance > 0.0) || !(floor > 0.0)) throw InvalidArgument("tolerances must be positive");
  const GradientResult g = gradient_potential(problem, idx, y, sigma, components);
  auto phi = [&](const Eigen::VectorXd& q) {
    return 0.5 * (y - problem.forward_map(from_components(q, idx))).squaredNorm() / (sigma * sigma);
  };
  GradientCheck out;
  out.phi = g.phi;
  out.adjoint = g.gradient.values;
  out.finite_difference.resize(components.size());
  out.error.resize(components.size());
  const double scale_floor = floor / tolerance;
  for (Eigen::Index c = 0; c < components.size(); ++c) {
    Eigen::VectorXd q = components;
    auto at = [&](double offset) {
      q[c] = components[c] + offset;
      return phi(q);
    };
    const double fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
    out.finite_difference[c] = fd;
    out.error[c] = std::abs(out.adjoint[c] - fd) / std::max(std::abs(fd), scale_floor);
  }
  return out;
}

}  // namespace flowinfer
