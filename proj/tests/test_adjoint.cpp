#include <cmath>
#include <numbers>

#include "doctest.h"
#include "flowinfer/adjoint.hpp"
#include "flowinfer/errors.hpp"
#include "flowinfer/inference.hpp"
#include "flowinfer/scenario.hpp"

using namespace flowinfer;

namespace {

constexpr double kPi = std::numbers::pi;

struct Setup {
  FlowIndexSet idx{2.0};
  ForwardProblem problem;
  Eigen::VectorXd y;
  double sigma = 0.05;
};

Setup small_setup(std::uint64_t seed, int n_obs = 16) {
  Rng rng(seed);
  SolverConfig c;
  c.scalar_cutoff = 6;
  c.dt = 1e-2;
  c.t_final = 0.3;
  ObservationSpec spec;
  for (int j = 0; j < n_obs; ++j) spec.push_back({c.t_final * (1.0 - rng.uniform()), {rng.uniform(), rng.uniform()}});
  Setup s{FlowIndexSet(2.0), ForwardProblem(example_theta0(), spec, c), Eigen::VectorXd(), 0.05};
  s.y = Eigen::VectorXd::NullaryExpr(n_obs, [&] { return 0.5 + 0.3 * rng.normal(); });
  return s;
}

Eigen::VectorXd random_components(const FlowIndexSet& idx, Rng& rng) {
  Eigen::VectorXd q(static_cast<Eigen::Index>(idx.component_count()));
  for (auto& v : q) v = rng.normal();
  return q;
}

}  // namespace

TEST_CASE("adjoint forcing weights and profiles") {
  const ObservationSpec spec{{1.0, {0.0, 0.0}}, {0.4, {0.25, 0.5}}};
  Eigen::VectorXd res(2);
  res << 0.3, -1.0;
  const auto f = build_adjoint_forcing(res, spec, 0.5, 1.0, 2);
  REQUIRE(f.impulses.size() == 2);
  CHECK(f.impulses[0].time == 0.0);
  CHECK(f.impulses[1].time == doctest::Approx(0.6));
  CHECK(f.impulses[0].weight == doctest::Approx(1.2));
  CHECK(f.impulses[1].weight == doctest::Approx(-4.0));
  for (int kx = -2; kx <= 2; ++kx)
    for (int ky = -2; ky <= 2; ++ky) {
      CHECK(std::abs(f.impulses[0].profile.at({kx, ky}) - 1.0) <= 1e-15);
      const Complex expect = std::polar(1.0, -2 * kPi * (0.25 * kx + 0.5 * ky));
      CHECK(std::abs(f.impulses[1].profile.at({kx, ky}) - expect) <= 1e-14);
    }
  CHECK_THROWS_AS(build_adjoint_forcing(res, spec, 0.0, 1.0, 2), InvalidArgument);
  CHECK_THROWS_AS(build_adjoint_forcing(Eigen::VectorXd::Zero(3), spec, 1.0, 1.0, 2), IndexMismatch);
}

TEST_CASE("zero adjoint forcing gives a zero adjoint state") {
  SolverConfig c;
  c.scalar_cutoff = 4;
  c.dt = 0.05;
  c.t_final = 0.5;
  const auto traj = solve_adjoint(DivFreeVelocityField(), AdjointForcing{0.5, {}}, c);
  CHECK(traj.real_states().isZero());
}

TEST_CASE("adjoint state without flow decays like the heat equation") {
  SolverConfig c;
  c.scalar_cutoff = 3;
  c.dt = 1e-3;
  c.t_final = 0.1;
  const ObservationSpec spec{{c.t_final, {0.0, 0.0}}};
  const auto f = build_adjoint_forcing(Eigen::VectorXd::Constant(1, 0.25), spec, 0.5, c.t_final, c.scalar_cutoff);
  const auto traj = solve_adjoint(DivFreeVelocityField(), f, c);
  const int n = traj.steps();
  for (WaveVector k : {WaveVector{0, 0}, WaveVector{1, 0}, WaveVector{1, 2}, WaveVector{-2, 1}}) {
    // Discrete adjoint per mode: the injection is solved once with (1 - dt lambda / 2),
    // then each step multiplies by the CN factor.
    const double lambda = -4 * kPi * kPi * c.kappa * k.norm_squared();
    const Complex r = crank_nicolson_factor(lambda, c.dt);
    for (int s : {0, n / 2, n}) {
      const Complex expect = std::pow(r, s) / (1.0 - 0.5 * c.dt * lambda);
      CHECK(std::abs(traj.state(s).at(k) - expect) <= 1e-12);
    }
    if (k.norm_squared() == 1) {
      const Complex ratio = traj.state(n).at(k) / traj.state(0).at(k);
      CHECK(std::abs(ratio - std::exp(lambda * c.t_final)) / std::exp(lambda * c.t_final) <= 1e-3);
    }
  }
}

TEST_CASE("adjoint solve is linear in the forcing") {
  Rng rng(2);
  const auto v = from_components(random_components(FlowIndexSet(2.0), rng), FlowIndexSet(2.0));
  SolverConfig c;
  c.scalar_cutoff = 5;
  c.dt = 0.02;
  c.t_final = 0.4;
  const ObservationSpec s1{{0.3, {0.2, 0.1}}}, s2{{0.1, {0.6, 0.9}}};
  const auto f1 = build_adjoint_forcing(Eigen::VectorXd::Constant(1, 1.0), s1, 1.0, c.t_final, c.scalar_cutoff);
  const auto f2 = build_adjoint_forcing(Eigen::VectorXd::Constant(1, 1.0), s2, 1.0, c.t_final, c.scalar_cutoff);
  AdjointForcing both{c.t_final, {f1.impulses[0], f2.impulses[0]}};
  both.impulses[0].weight = 2.0;
  both.impulses[1].weight = -3.0;
  const Eigen::MatrixXd l1 = solve_adjoint(v, f1, c).real_states();
  const Eigen::MatrixXd l2 = solve_adjoint(v, f2, c).real_states();
  const Eigen::MatrixXd l12 = solve_adjoint(v, both, c).real_states();
  CHECK((l12 - (2.0 * l1 - 3.0 * l2)).cwiseAbs().maxCoeff() <= 1e-12 * l12.cwiseAbs().maxCoeff());
}

TEST_CASE("zero residual gives a zero gradient") {
  Setup s = small_setup(1);
  Rng rng(5);
  const Eigen::VectorXd q = random_components(s.idx, rng);
  s.y = s.problem.forward_map(from_components(q, s.idx));
  const auto r = gradient_potential(s.problem, s.idx, s.y, s.sigma, q);
  CHECK(r.phi == 0.0);
  CHECK(r.gradient.values.isZero());
}

TEST_CASE("doubling the residual doubles the gradient") {
  Setup s = small_setup(2);
  Rng rng(6);
  const Eigen::VectorXd q = random_components(s.idx, rng);
  const Eigen::VectorXd g = s.problem.forward_map(from_components(q, s.idx));
  const auto a = gradient_potential(s.problem, s.idx, s.y, s.sigma, q);
  const Eigen::VectorXd y2 = g + 2.0 * (s.y - g);
  const auto b = gradient_potential(s.problem, s.idx, y2, s.sigma, q);
  CHECK((b.gradient.values - 2.0 * a.gradient.values).norm() <= 1e-10 * a.gradient.values.norm());
  CHECK(b.phi == doctest::Approx(4.0 * a.phi).epsilon(1e-12));
}

TEST_CASE("adjoint gradient matches central differences") {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const Setup s = small_setup(seed);
    Rng rng(seed + 100);
    const Eigen::VectorXd q = random_components(s.idx, rng);
    const auto check = check_gradient(s.problem, s.idx, s.y, s.sigma, q, 1e-5);
    CHECK(check.error.maxCoeff() <= 1e-4);
    CHECK(check.phi > 0.0);
  }
}

TEST_CASE("gradient potential agrees with the plain potential") {
  const Setup s = small_setup(7);
  Rng rng(1);
  const Eigen::VectorXd q = random_components(s.idx, rng);
  const auto r = gradient_potential(s.problem, s.idx, s.y, s.sigma, q);
  const Eigen::VectorXd g = s.problem.forward_map(from_components(q, s.idx));
  CHECK(r.phi == doctest::Approx(0.5 * (s.y - g).squaredNorm() / (s.sigma * s.sigma)).epsilon(1e-13));
}

TEST_CASE("directional derivative properties") {
  const Setup s = small_setup(8);
  Rng rng(2);
  const Eigen::VectorXd q = random_components(s.idx, rng);
  const Eigen::VectorXd grad = gradient_potential(s.problem, s.idx, s.y, s.sigma, q).gradient.values;
  const Eigen::Index d = q.size();
  CHECK(directional_derivative(s.problem, s.idx, s.y, s.sigma, q, Eigen::VectorXd::Zero(d)) == 0.0);
  const Eigen::VectorXd e3 = Eigen::VectorXd::Unit(d, 3);
  CHECK(directional_derivative(s.problem, s.idx, s.y, s.sigma, q, e3) == doctest::Approx(grad[3]).epsilon(1e-12));
  const Eigen::VectorXd w = random_components(s.idx, rng);
  const double dw = directional_derivative(s.problem, s.idx, s.y, s.sigma, q, w);
  CHECK(directional_derivative(s.problem, s.idx, s.y, s.sigma, q, -w) == doctest::Approx(-dw).epsilon(1e-12));

  // Central difference along w converges at second order.
  ForwardProblem p = s.problem;
  auto phi = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd g = p.forward_map(from_components(x, s.idx));
    return 0.5 * (s.y - g).squaredNorm() / (s.sigma * s.sigma);
  };
  const double e1 = std::abs((phi(q + 1e-2 * w) - phi(q - 1e-2 * w)) / 2e-2 - dw);
  const double e2 = std::abs((phi(q + 5e-3 * w) - phi(q - 5e-3 * w)) / 1e-2 - dw);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("model gradient costs one forward and one adjoint solve") {
  const Setup s = small_setup(9);
  PdeModel model(s.problem, s.idx, s.y, s.sigma);
  Rng rng(3);
  const Eigen::VectorXd q = random_components(s.idx, rng);
  Eigen::VectorXd grad;
  model.potential_and_gradient(q, grad);
  CHECK(model.counters() == SolveCounters{1, 1, 0});
  model.potential(q);
  CHECK(model.counters() == SolveCounters{2, 1, 0});
  CHECK(grad.size() == q.size());
}

TEST_CASE("symmetric scenario potential and gradient under reflection") {
  // x -> -x maps the flow v to -v(-x): mean and cosine amplitudes flip, sine amplitudes stay.
  // The even initial scalar and the reflection-fixed sensors make Phi invariant.
  const Scenario sc = make_scenario("example2", "small", 1);
  const FlowIndexSet idx = sc.index_set();
  const auto problem = sc.forward_problem();
  const Eigen::VectorXd y = sc.noiseless_data();
  Eigen::VectorXd reflect = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(idx.component_count()));
  for (Eigen::Index i = 0; i < reflect.size(); ++i)
    if (i < 2 || i % 2 == 0) reflect[i] = -1.0;
  Rng rng(4);
  const Eigen::VectorXd q = random_components(idx, rng);
  const auto a = gradient_potential(problem, idx, y, sc.sigma_eta, q);
  const auto b = gradient_potential(problem, idx, y, sc.sigma_eta, reflect.cwiseProduct(q));
  CHECK(a.phi == doctest::Approx(b.phi).epsilon(1e-10));
  CHECK((b.gradient.values - reflect.cwiseProduct(a.gradient.values)).norm() <= 1e-8 * a.gradient.values.norm());
}
