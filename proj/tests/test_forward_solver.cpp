#include <cmath>
#include <numbers>

#include "doctest.h"
#include "flowinfer/diagnostics.hpp"
#include "flowinfer/errors.hpp"
#include "flowinfer/forward_solver.hpp"
#include "flowinfer/inference.hpp"
#include "flowinfer/scenario.hpp"

using namespace flowinfer;

namespace {

constexpr double kPi = std::numbers::pi;

DivFreeVelocityField random_flow(double cutoff, std::uint64_t seed, double scale = 1.0) {
  const FlowIndexSet idx(cutoff);
  Rng rng(seed);
  Eigen::VectorXd q(static_cast<Eigen::Index>(idx.component_count()));
  for (auto& v : q) v = scale * rng.normal();
  return from_components(q, idx);
}

SolverConfig config(int cutoff, double dt, double t_final, double kappa = 0.282) {
  SolverConfig c;
  c.scalar_cutoff = cutoff;
  c.dt = dt;
  c.t_final = t_final;
  c.kappa = kappa;
  return c;
}

double max_coeff_diff(const ScalarSpectralField& a, const ScalarSpectralField& b) {
  return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff();
}

// Real-space oracle: fourth-order central differences and RK4 on an n x n grid.
Eigen::MatrixXd fd_solve(const DivFreeVelocityField& v, const ScalarSpectralField& theta0, double kappa, int n,
                         double dt, int steps) {
  const double h = 1.0 / n;
  Eigen::MatrixXd ux(n, n), uy(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d u = evaluate_velocity(v, Eigen::Vector2d(i * h, j * h));
      ux(i, j) = u[0];
      uy(i, j) = u[1];
    }
  auto wrap = [n](int i) { return (i % n + n) % n; };
  auto rhs = [&](const Eigen::MatrixXd& th) {
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        auto at = [&](int di, int dj) { return th(wrap(i + di), wrap(j + dj)); };
        const double dx = (-at(2, 0) + 8 * at(1, 0) - 8 * at(-1, 0) + at(-2, 0)) / (12 * h);
        const double dy = (-at(0, 2) + 8 * at(0, 1) - 8 * at(0, -1) + at(0, -2)) / (12 * h);
        const double lap = (-at(2, 0) + 16 * at(1, 0) - 30 * at(0, 0) + 16 * at(-1, 0) - at(-2, 0) - at(0, 2) +
                            16 * at(0, 1) - 30 * at(0, 0) + 16 * at(0, -1) - at(0, -2)) /
                           (12 * h * h);
        out(i, j) = kappa * lap - ux(i, j) * dx - uy(i, j) * dy;
      }
    return out;
  };
  Eigen::MatrixXd th = sample_on_grid(theta0, n);
  for (int s = 0; s < steps; ++s) {
    const Eigen::MatrixXd k1 = rhs(th);
    const Eigen::MatrixXd k2 = rhs(th + 0.5 * dt * k1);
    const Eigen::MatrixXd k3 = rhs(th + 0.5 * dt * k2);
    const Eigen::MatrixXd k4 = rhs(th + dt * k3);
    th += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return th;
}

}  // namespace

TEST_CASE("solver config validation") {
  CHECK_NOTHROW(config(4, 1e-2, 1.0).validate());
  CHECK(config(4, 1e-2, 1.0).steps() == 100);
  CHECK_THROWS_AS(config(4, 0.0, 1.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(config(4, 0.3, 1.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(config(4, 1e-2, 1.0, -1.0).validate(), InvalidArgument);
  CHECK_THROWS_AS(config(-1, 1e-2, 1.0).validate(), InvalidArgument);
}

TEST_CASE("scalar basis layouts round trip") {
  const ScalarBasis basis(3);
  ScalarSpectralField f(3);
  Rng rng(4);
  for (const auto& k : basis.representatives()) f.set_real_pair(k, Complex(rng.normal(), rng.normal()));
  f.set({0, 0}, rng.normal());
  const Eigen::VectorXcd back = basis.to_complex(basis.to_real(f.coeffs()));
  CHECK((back - f.coeffs()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(basis.pair_index({0, 0}) == -1);
  CHECK(basis.pair_index({1, 2}) == basis.pair_index({-1, -2}));
}

TEST_CASE("zero velocity generator is the diagonal heat operator") {
  const double kappa = 0.282;
  const Generator gen(DivFreeVelocityField(), ScalarBasis(3), kappa);
  Eigen::VectorXcd theta = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(gen.basis().size()));
  Rng rng(8);
  for (auto& z : theta) z = Complex(rng.normal(), rng.normal());
  const Eigen::VectorXcd a = gen.apply(theta);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const WaveVector k = gen.basis().wave(static_cast<int>(i));
    CHECK(std::abs(a[i] + 4 * kPi * kPi * kappa * k.norm_squared() * theta[i]) <= 1e-12);
  }
}

TEST_CASE("mean mode row of the generator is zero") {
  const Generator gen(random_flow(2.0, 1), ScalarBasis(4), 0.1);
  const auto& a = gen.matrix();
  for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a, 0); it; ++it) CHECK(it.value() == 0.0);
}

TEST_CASE("sparse and matrix-free generators agree") {
  const Generator gen(random_flow(3.0, 2), ScalarBasis(5), 0.2);
  const ScalarBasis& b = gen.basis();
  Rng rng(1);
  Eigen::VectorXd x(static_cast<Eigen::Index>(b.size()));
  for (auto& v : x) v = rng.normal();
  const Eigen::VectorXd via_matrix = gen.matrix() * x;
  const Eigen::VectorXd via_apply = b.to_real(gen.apply(b.to_complex(x)));
  CHECK((via_matrix - via_apply).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("crank nicolson step examples") {
  Eigen::VectorXcd x(3);
  x << Complex(1, 2), Complex(-3, 0), Complex(0.5, -1);
  CHECK((step_crank_nicolson(x, Eigen::MatrixXcd::Zero(3, 3), 0.1) - x).norm() == 0.0);
  const double lambda = -2.0, dt = 0.1;
  const Eigen::VectorXcd y = step_crank_nicolson(x, lambda * Eigen::MatrixXcd::Identity(3, 3), dt);
  const Complex f = crank_nicolson_factor(lambda, dt);
  CHECK(std::abs(f - (1 - 0.1) / (1 + 0.1)) <= 1e-15);
  CHECK((y - f * x).norm() <= 1e-14);
}

TEST_CASE("zero velocity decay matches the heat factor") {
  const ScalarSpectralField theta0 = example_theta0();
  const SolverConfig c = config(4, 1e-3, 0.1);
  const auto traj = solve_forward(DivFreeVelocityField(), theta0, c);
  const ScalarSpectralField end = traj.state(traj.steps());
  const double decay = std::exp(-4 * kPi * kPi * c.kappa * c.t_final);
  for (WaveVector k : {WaveVector{1, 0}, WaveVector{0, 1}, WaveVector{-1, 0}}) {
    const Complex expect = theta0.at(k) * decay;
    CHECK(std::abs(end.at(k) - expect) / std::abs(expect) <= 1e-3);
  }
  CHECK(end.at({0, 0}).real() == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("laminar flow leaves a y-independent scalar unchanged") {
  // v = (0, g(x)) and theta0 = f(x): u . grad theta = 0, so only diffusion acts.
  const DivFreeVelocityField laminar(Eigen::Vector2d::Zero(),
                                     {{{1, 0}, Complex(1.3, -0.4)}, {{2, 0}, Complex(-0.7, 0.2)}});
  ScalarSpectralField theta0(4);
  theta0.set({0, 0}, 0.3);
  theta0.set_real_pair({1, 0}, Complex(0.2, 0.1));
  theta0.set_real_pair({3, 0}, Complex(-0.05, 0.0));
  const SolverConfig c = config(4, 1e-2, 0.5);
  const auto with_flow = solve_forward(laminar, theta0, c);
  const auto without = solve_forward(DivFreeVelocityField(), theta0, c);
  for (int n = 0; n <= with_flow.steps(); n += 10) CHECK(max_coeff_diff(with_flow.state(n), without.state(n)) <= 1e-12);
}

TEST_CASE("mean scalar is conserved and the state stays real") {
  const ScalarSpectralField theta0 = example_theta0();
  const auto traj = solve_forward(random_flow(4.0, 6), theta0, config(6, 1e-2, 1.0));
  for (int n = 0; n <= traj.steps(); ++n) {
    const auto s = traj.state(n);
    CHECK(std::abs(s.at({0, 0}) - theta0.at({0, 0})) <= 1e-12);
    CHECK(s.reality_defect() <= 1e-12);
  }
}

TEST_CASE("scalar variance never grows") {
  const auto traj = solve_forward(random_flow(4.0, 7), example_theta0(), config(6, 1e-2, 1.0));
  double prev = scalar_variance(traj.state(0));
  for (int n = 1; n <= traj.steps(); ++n) {
    const double v = scalar_variance(traj.state(n));
    CHECK(v <= prev + 1e-14);
    prev = v;
  }
}

TEST_CASE("sampled maximum principle") {
  const ScalarSpectralField theta0 = example_theta0();
  const double bound = sample_on_grid(theta0, 64).maxCoeff();
  const double lower = sample_on_grid(theta0, 64).minCoeff();
  const auto traj = solve_forward(random_flow(4.0, 12), theta0, config(12, 5e-3, 0.5));
  for (int n = 0; n <= traj.steps(); n += 10) {
    const Eigen::MatrixXd g = sample_on_grid(traj.state(n), 64);
    CHECK(g.maxCoeff() <= bound + 1e-6);
    CHECK(g.minCoeff() >= lower - 1e-6);
  }
}

TEST_CASE("crank nicolson converges at second order") {
  const auto v = random_flow(2.0, 3);
  const ScalarSpectralField theta0 = example_theta0();
  const double t = 0.2;
  const double dt = 0.02;
  const auto state_at = [&](double step) {
    const auto traj = solve_forward(v, theta0, config(8, step, t));
    return traj.state(traj.steps());
  };
  const auto ref = state_at(dt / 32);
  const double e1 = max_coeff_diff(state_at(dt), ref);
  const double e2 = max_coeff_diff(state_at(dt / 2), ref);
  const double ratio = e1 / e2;
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("spectral solve agrees with a finite-difference oracle") {
  const auto v = random_flow(2.0, 21, 0.5);
  const ScalarSpectralField theta0 = example_theta0();
  const double dt = 1e-4;
  const int steps = 500;
  const auto traj = solve_forward(v, theta0, config(16, dt, dt * steps));
  const Eigen::MatrixXd spectral = sample_on_grid(traj.state(steps), 64);
  const Eigen::MatrixXd fd = fd_solve(v, theta0, 0.282, 64, dt, steps);
  CHECK((spectral - fd).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("direct and iterative solves agree") {
  const auto v = random_flow(3.0, 5);
  SolverConfig c = config(6, 1e-2, 0.3);
  c.linear_solve = LinearSolve::direct;
  const auto a = solve_forward(v, example_theta0(), c);
  c.linear_solve = LinearSolve::iterative;
  c.iterative_tolerance = 1e-13;
  const auto b = solve_forward(v, example_theta0(), c);
  CHECK((a.real_states() - b.real_states()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("point evaluation and time interpolation") {
  const ScalarSpectralField theta0 = example_theta0();
  const auto traj = solve_forward(DivFreeVelocityField(), theta0, config(4, 0.1, 1.0));
  CHECK(std::abs(evaluate_point(traj, 0.0, Eigen::Vector2d(0.0, 0.0))) <= 1e-14);
  CHECK(evaluate_point(traj, 0.0, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(1.0));
  const Eigen::Vector2d x(0.3, 0.7);
  const double a = traj.evaluate_point(0.2, x), b = traj.evaluate_point(0.3, x);
  CHECK(traj.evaluate_point(0.25, x) == doctest::Approx(0.5 * (a + b)).epsilon(1e-14));
  CHECK_THROWS_AS(traj.evaluate_point(1.5, x), OutOfRange);
  CHECK_THROWS_AS(traj.evaluate_point(-0.1, x), OutOfRange);

  ScalarSpectralField constant(2);
  constant.set({0, 0}, 0.75);
  const auto flat = solve_forward(random_flow(2.0, 1), constant, config(2, 0.1, 1.0));
  CHECK(flat.evaluate_point(0.55, x) == doctest::Approx(0.75).epsilon(1e-13));
}

TEST_CASE("forward map shapes and observation ordering") {
  const auto v = random_flow(2.0, 4);
  const SolverConfig c = config(6, 1e-2, 0.5);
  CHECK(forward_map(v, example_theta0(), {}, c).size() == 0);
  const ObservationSpec spec{{0.5, {0.1, 0.2}}, {0.25, {0.7, 0.4}}, {0.5, {0.1, 0.2}}};
  const Eigen::VectorXd g = forward_map(v, example_theta0(), spec, c);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == g[2]);
  const auto traj = solve_forward(v, example_theta0(), c);
  CHECK(g[1] == doctest::Approx(traj.evaluate_point(0.25, spec[1].x)).epsilon(1e-12));
}

TEST_CASE("forward map without flow is the analytic heat solution") {
  SolverConfig c = config(4, 1e-4, 0.2);
  Rng rng(13);
  ObservationSpec spec;
  for (int j = 0; j < 10; ++j) spec.push_back({0.2 * rng.uniform(), {rng.uniform(), rng.uniform()}});
  const Eigen::VectorXd g = forward_map(DivFreeVelocityField(), example_theta0(), spec, c);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const auto& p = spec[j];
    const double expect = 0.5 - 0.25 * std::exp(-4 * kPi * kPi * c.kappa * p.t) *
                                    (std::cos(2 * kPi * p.x[0]) + std::cos(2 * kPi * p.x[1]));
    CHECK(g[static_cast<Eigen::Index>(j)] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("symmetric flow pair gives point-symmetric predictions") {
  // theta0 is even and the observation points are fixed by x -> -x, so G(v*) = G(-v*).
  const Scenario s = make_scenario("example2", "small", 1);
  const auto problem = s.forward_problem();
  const Eigen::VectorXd gp = problem.forward_map(s.truth());
  const Eigen::VectorXd gm = problem.forward_map(-s.truth());
  CHECK((gp - gm).cwiseAbs().maxCoeff() <= 1e-12);
}
