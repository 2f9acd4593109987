#include "flowinfer/forward_solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowinfer/errors.hpp"

namespace flowinfer {

namespace {

constexpr double kPi = std::numbers::pi;

int cross(WaveVector a, WaveVector b) { return a.kx * b.ky - a.ky * b.kx; }

// Fraction of a grid step tolerated when mapping times onto the grid.
constexpr double kGridSlack = 1e-9;

}  // namespace

int SolverConfig::steps() const {
  const double n = t_final / dt;
  return static_cast<int>(std::llround(n));
}

void SolverConfig::validate() const {
  if (scalar_cutoff < 0) throw InvalidArgument("scalar_cutoff must be nonnegative");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw InvalidArgument("t_final must be positive");
  if (!(kappa >= 0.0)) throw InvalidArgument("kappa must be nonnegative");
  const double n = t_final / dt;
  if (std::abs(n - std::round(n)) > 1e-6 * std::max(1.0, n) || std::round(n) < 1.0) {
    throw InvalidArgument("t_final must be a positive whole multiple of dt");
  }
  if (!(iterative_tolerance > 0.0)) throw InvalidArgument("iterative_tolerance must be positive");
}

Generator::Generator(const DivFreeVelocityField& field, const ScalarBasis& basis, double kappa)
    : basis_(basis), kappa_(kappa), mean_(field.mean_flow()) {
  const int reach = 2 * basis_.cutoff();
  for (const auto& [k, v] : field.modes()) {
    // Modes wider than the grid diameter cannot couple two resolved modes.
    if (v == Complex{} || std::abs(k.kx) > reach || std::abs(k.ky) > reach) continue;
    const double inv = 1.0 / k.norm();
    terms_.push_back({k, v * inv});
    terms_.push_back({-k, -std::conj(v) * inv});
  }

  const auto n = static_cast<Eigen::Index>(basis_.size());
  const int centre = basis_.complex_index({0, 0});
  const auto& reps = basis_.representatives();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * (terms_.size() + 1) * 2);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
  std::vector<int> touched;

  auto push_input = [&](WaveVector km, Complex value) {
    const int m = basis_.complex_index(km);
    const double diffusion = -4.0 * kPi * kPi * kappa_ * km.norm_squared();
    const Complex mean_rate(0.0, -2.0 * kPi * (mean_[0] * km.kx + mean_[1] * km.ky));
    out[m] += (diffusion + mean_rate) * value;
    touched.push_back(m);
    for (const auto& term : terms_) {
      const WaveVector kl = km + term.k;
      if (!basis_.contains(kl)) continue;
      const int l = basis_.complex_index(kl);
      out[l] += advection_rate(term, km) * value;
      touched.push_back(l);
    }
  };

  auto flush_column = [&](Eigen::Index col) {
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (int l : touched) {
      const Complex z = out[l];
      out[l] = 0.0;
      if (l == centre) {
        if (z.real() != 0.0) triplets.emplace_back(0, col, z.real());
        continue;
      }
      const WaveVector kl = basis_.wave(l);
      if (!kl.is_representative()) continue;
      const int p = basis_.pair_index(kl);
      if (z.real() != 0.0) triplets.emplace_back(1 + 2 * p, col, z.real());
      if (z.imag() != 0.0) triplets.emplace_back(2 + 2 * p, col, z.imag());
    }
    touched.clear();
  };

  push_input({0, 0}, 1.0);
  flush_column(0);
  for (std::size_t p = 0; p < reps.size(); ++p) {
    const WaveVector k = reps[p];
    push_input(k, 1.0);
    push_input(-k, 1.0);
    flush_column(static_cast<Eigen::Index>(1 + 2 * p));
    push_input(k, Complex(0.0, 1.0));
    push_input(-k, Complex(0.0, -1.0));
    flush_column(static_cast<Eigen::Index>(2 + 2 * p));
  }
  matrix_.resize(n, n);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();
}

Complex Generator::advection_rate(const FlowTerm& term, WaveVector km) const {
  const int c = cross(term.k, km);
  if (c == 0) return 0.0;
  return Complex(0.0, -2.0 * kPi * c) * term.amplitude;
}

Eigen::VectorXcd Generator::apply(const Eigen::VectorXcd& theta) const {
  const auto n = static_cast<Eigen::Index>(basis_.size());
  if (theta.size() != n) throw IndexMismatch("state length does not match scalar basis");
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
  for (int m = 0; m < n; ++m) {
    const Complex value = theta[m];
    if (value == Complex{}) continue;
    const WaveVector km = basis_.wave(m);
    const double diffusion = -4.0 * kPi * kPi * kappa_ * km.norm_squared();
    const Complex mean_rate(0.0, -2.0 * kPi * (mean_[0] * km.kx + mean_[1] * km.ky));
    out[m] += (diffusion + mean_rate) * value;
    for (const auto& term : terms_) {
      const WaveVector kl = km + term.k;
      if (!basis_.contains(kl)) continue;
      out[basis_.complex_index(kl)] += advection_rate(term, km) * value;
    }
  }
  return out;
}

Generator assemble_generator(const DivFreeVelocityField& field, int scalar_cutoff, double kappa) {
  return Generator(field, ScalarBasis(scalar_cutoff), kappa);
}

LinearSolve choose_linear_solve(Eigen::Index size, Eigen::Index nonzeros, int steps) {
  const double n = static_cast<double>(size);
  if (n > 5000) return LinearSolve::iterative;
  const double dense = (2.0 / 3.0) * n * n * n + steps * 2.0 * n * n;
  // Roughly ten BiCGSTAB iterations of two products each per step.
  const double iterative = steps * 40.0 * static_cast<double>(nonzeros + size);
  return dense <= iterative ? LinearSolve::direct : LinearSolve::iterative;
}

struct CrankNicolsonStepper::Impl {
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  bool direct = true;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Sparse p;
  Sparse pt;
  Eigen::BiCGSTAB<Sparse, Eigen::DiagonalPreconditioner<double>> bicg;
  Eigen::BiCGSTAB<Sparse, Eigen::DiagonalPreconditioner<double>> bicg_t;
};

namespace {

template <class Solver>
Eigen::VectorXd iterate(const Solver& solver, const Eigen::VectorXd& rhs) {
  Eigen::VectorXd x = solver.solveWithGuess(rhs, rhs);
  if (solver.info() != Eigen::Success) throw SolverFailure("BiCGSTAB did not converge", solver.error());
  return x;
}

}  // namespace

CrankNicolsonStepper::CrankNicolsonStepper(const Generator& generator, double dt, LinearSolve mode,
                                           int steps_hint, double tolerance)
    : dt_(dt), impl_(std::make_unique<Impl>()) {
  const auto& a = generator.matrix();
  if (mode == LinearSolve::automatic) mode = choose_linear_solve(a.rows(), a.nonZeros(), steps_hint);
  Impl::Sparse identity(a.rows(), a.cols());
  identity.setIdentity();
  impl_->p = identity - (0.5 * dt) * a;
  impl_->p.makeCompressed();
  if (mode == LinearSolve::direct) {
    impl_->direct = true;
    impl_->lu.compute(Eigen::MatrixXd(impl_->p));
    impl_->p = Impl::Sparse();
  } else {
    impl_->direct = false;
    impl_->bicg.setTolerance(tolerance);
    impl_->bicg.setMaxIterations(2000);
    impl_->bicg.compute(impl_->p);
    impl_->pt = impl_->p.transpose();
    impl_->bicg_t.setTolerance(tolerance);
    impl_->bicg_t.setMaxIterations(2000);
    impl_->bicg_t.compute(impl_->pt);
  }
}

CrankNicolsonStepper::~CrankNicolsonStepper() = default;
CrankNicolsonStepper::CrankNicolsonStepper(CrankNicolsonStepper&&) noexcept = default;
CrankNicolsonStepper& CrankNicolsonStepper::operator=(CrankNicolsonStepper&&) noexcept = default;

bool CrankNicolsonStepper::is_direct() const { return impl_->direct; }

Eigen::VectorXd CrankNicolsonStepper::solve(const Eigen::VectorXd& rhs) const {
  if (impl_->direct) return impl_->lu.solve(rhs);
  return iterate(impl_->bicg, rhs);
}

Eigen::VectorXd CrankNicolsonStepper::solve_transposed(const Eigen::VectorXd& rhs) const {
  if (impl_->direct) return impl_->lu.transpose().solve(rhs);
  return iterate(impl_->bicg_t, rhs);
}

ScalarTrajectory::ScalarTrajectory(ScalarBasis basis, double dt, Eigen::MatrixXd real_states)
    : basis_(std::move(basis)), dt_(dt), states_(std::move(real_states)) {
  if (states_.rows() != static_cast<Eigen::Index>(basis_.size()) || states_.cols() < 1) {
    throw IndexMismatch("trajectory shape does not match scalar basis");
  }
}

std::vector<double> ScalarTrajectory::times() const {
  std::vector<double> t(static_cast<std::size_t>(states_.cols()));
  for (std::size_t n = 0; n < t.size(); ++n) t[n] = dt_ * static_cast<double>(n);
  return t;
}

ScalarSpectralField ScalarTrajectory::state(int n) const {
  if (n < 0 || n > steps()) throw OutOfRange("trajectory index out of range");
  return ScalarSpectralField(basis_.cutoff(), basis_.to_complex(states_.col(n)));
}

namespace {

struct Bracket {
  int lo;
  double w_hi;
};

Bracket bracket(double t, double dt, int steps) {
  const double s = t / dt;
  if (!(s >= -kGridSlack) || s > steps + kGridSlack) throw OutOfRange("observation time outside [0, T]");
  if (steps == 0) return {0, 0.0};
  int lo = static_cast<int>(std::floor(s));
  lo = std::clamp(lo, 0, steps - 1);
  double w = std::clamp(s - lo, 0.0, 1.0);
  if (w < kGridSlack) w = 0.0;
  if (w > 1.0 - kGridSlack) w = 1.0;
  return {lo, w};
}

Eigen::RowVectorXd evaluation_row(const ScalarBasis& basis, const Eigen::Vector2d& x) {
  const auto& reps = basis.representatives();
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(basis.size()));
  row[0] = 1.0;
  for (std::size_t j = 0; j < reps.size(); ++j) {
    const double phi = 2.0 * kPi * (reps[j].kx * x[0] + reps[j].ky * x[1]);
    row[static_cast<Eigen::Index>(1 + 2 * j)] = 2.0 * std::cos(phi);
    row[static_cast<Eigen::Index>(2 + 2 * j)] = -2.0 * std::sin(phi);
  }
  return row;
}

}  // namespace

double ScalarTrajectory::evaluate_point(double t, const Eigen::Vector2d& x) const {
  const Bracket b = bracket(t, dt_, steps());
  const Eigen::RowVectorXd row = evaluation_row(basis_, x);
  double value = (1.0 - b.w_hi) * row.dot(states_.col(b.lo));
  if (b.w_hi > 0.0) value += b.w_hi * row.dot(states_.col(b.lo + 1));
  return value;
}

ObservationOperator::ObservationOperator(const ObservationSpec& spec, const ScalarBasis& basis, double dt,
                                         int steps) {
  rows_.resize(static_cast<Eigen::Index>(spec.size()), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const Bracket b = bracket(spec[j].t, dt, steps);
    lo_.push_back(b.lo);
    w_hi_.push_back(b.w_hi);
    rows_.row(static_cast<Eigen::Index>(j)) = evaluation_row(basis, spec[j].x);
  }
}

Eigen::VectorXd ObservationOperator::apply(const Eigen::MatrixXd& states) const {
  Eigen::VectorXd g(static_cast<Eigen::Index>(size()));
  for (std::size_t j = 0; j < size(); ++j) {
    const auto r = rows_.row(static_cast<Eigen::Index>(j));
    double value = (1.0 - w_hi_[j]) * r.dot(states.col(lo_[j]));
    if (w_hi_[j] > 0.0) value += w_hi_[j] * r.dot(states.col(lo_[j] + 1));
    g[static_cast<Eigen::Index>(j)] = value;
  }
  return g;
}

void ObservationOperator::accumulate_adjoint_forcing(const Eigen::VectorXd& weights,
                                                     Eigen::MatrixXd& forcing) const {
  for (std::size_t j = 0; j < size(); ++j) {
    const auto profile = rows_.row(static_cast<Eigen::Index>(j)).transpose();
    const double w = weights[static_cast<Eigen::Index>(j)];
    forcing.col(lo_[j]) += (w * (1.0 - w_hi_[j])) * profile;
    if (w_hi_[j] > 0.0) forcing.col(lo_[j] + 1) += (w * w_hi_[j]) * profile;
  }
}

ForwardProblem::ForwardProblem(const ScalarSpectralField& theta0, ObservationSpec spec, SolverConfig config)
    : config_((config.validate(), config)),
      basis_(config_.scalar_cutoff),
      spec_(std::move(spec)),
      theta0_(basis_.to_real(theta0.resized(config_.scalar_cutoff).coeffs())),
      observation_(spec_, basis_, config_.dt, config_.steps()) {}

CrankNicolsonStepper ForwardProblem::make_stepper(const DivFreeVelocityField& field) const {
  const Generator generator(field, basis_, config_.kappa);
  return CrankNicolsonStepper(generator, config_.dt, config_.linear_solve, config_.steps(),
                              config_.iterative_tolerance);
}

Eigen::MatrixXd ForwardProblem::integrate(const CrankNicolsonStepper& stepper) const {
  const int steps = config_.steps();
  Eigen::MatrixXd states(theta0_.size(), steps + 1);
  states.col(0) = theta0_;
  for (int n = 0; n < steps; ++n) states.col(n + 1) = stepper.advance(states.col(n));
  return states;
}

ScalarTrajectory ForwardProblem::solve(const DivFreeVelocityField& field) const {
  return ScalarTrajectory(basis_, config_.dt, integrate(make_stepper(field)));
}

Eigen::VectorXd ForwardProblem::forward_map(const DivFreeVelocityField& field) const {
  return observation_.apply(integrate(make_stepper(field)));
}

Eigen::VectorXcd step_crank_nicolson(const Eigen::VectorXcd& state, const Eigen::MatrixXcd& generator,
                                     double dt) {
  if (generator.rows() != state.size() || generator.cols() != state.size()) {
    throw IndexMismatch("generator shape does not match state");
  }
  const auto identity = Eigen::MatrixXcd::Identity(state.size(), state.size());
  const Eigen::MatrixXcd lhs = identity - (0.5 * dt) * generator;
  const Eigen::VectorXcd rhs = state + (0.5 * dt) * (generator * state);
  return lhs.partialPivLu().solve(rhs);
}

ScalarTrajectory solve_forward(const DivFreeVelocityField& field, const ScalarSpectralField& theta0,
                               const SolverConfig& config) {
  return ForwardProblem(theta0, {}, config).solve(field);
}

double evaluate_point(const ScalarTrajectory& traj, double t, const Eigen::Vector2d& x) {
  return traj.evaluate_point(t, x);
}

Eigen::VectorXd forward_map(const DivFreeVelocityField& field, const ScalarSpectralField& theta0,
                            const ObservationSpec& spec, const SolverConfig& config) {
  return ForwardProblem(theta0, spec, config).forward_map(field);
}

}  // namespace flowinfer
