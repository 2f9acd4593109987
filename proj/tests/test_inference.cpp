#include <cmath>
#include <numbers>

#include "doctest.h"
#include "flowinfer/errors.hpp"
#include "flowinfer/inference.hpp"
#include "flowinfer/scenario.hpp"

using namespace flowinfer;

namespace {

constexpr double kPi = std::numbers::pi;

SolverConfig small_config() {
  SolverConfig c;
  c.scalar_cutoff = 5;
  c.dt = 1e-2;
  c.t_final = 0.5;
  return c;
}

}  // namespace

TEST_CASE("kraichnan energy examples") {
  CHECK(kraichnan_energy(1.7, 0.0, 10, 1.5) == 0.0);
  CHECK(kraichnan_energy(1.0, 1.0, 0, 1.5) == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));
  CHECK(kraichnan_energy(1.0, 1.0, 0, 0.3) == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));
  CHECK(kraichnan_energy(2.0, 3.0, 4, 1.5) == doctest::Approx(3.0 * kraichnan_energy(2.0, 1.0, 4, 1.5)));
}

TEST_CASE("kraichnan spectrum follows the power law between the subfield scales") {
  const int n = 10;
  const double xi = 1.5;
  std::vector<double> ks, es;
  for (double k = 2.0; k <= std::pow(2.0, n / 2 - 1); k *= 1.1) {
    ks.push_back(std::log(k));
    es.push_back(std::log(kraichnan_energy(k, 1.0, n, xi)));
  }
  const Eigen::Map<const Eigen::VectorXd> x(ks.data(), static_cast<Eigen::Index>(ks.size()));
  const Eigen::Map<const Eigen::VectorXd> y(es.data(), static_cast<Eigen::Index>(es.size()));
  const double xm = x.mean(), ym = y.mean();
  const double slope = ((x.array() - xm) * (y.array() - ym)).sum() / (x.array() - xm).square().sum();
  CHECK(std::abs(slope + xi) <= 0.15 * xi);
}

TEST_CASE("prior scale calibration") {
  const double e0 = kraichnan_e0_for_unit_sigma(1.0, 10, 1.5);
  const KraichnanPrior prior(FlowIndexSet(2.0), {e0, 10, 1.5, 0.0});
  CHECK(prior.stddev()[2] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(prior.stddev()[5] == doctest::Approx(1.0).epsilon(1e-13));
  const double var2 = kraichnan_energy(std::sqrt(2.0), e0, 10, 1.5) / (2 * kPi * std::sqrt(2.0));
  CHECK(prior.variance()[6] == doctest::Approx(var2).epsilon(1e-13));
  CHECK(prior.pinned(0));
  CHECK(prior.pinned(1));
  const KraichnanPrior with_mean(FlowIndexSet(1.0), {e0, 10, 1.5, 0.25});
  CHECK(with_mean.stddev()[0] == doctest::Approx(0.5));
}

TEST_CASE("zero prior gives the zero field") {
  const GaussianPrior prior(Eigen::VectorXd::Zero(6));
  Rng rng(1);
  CHECK(prior.sample(rng).isZero());
  CHECK(prior.cameron_martin_norm2(Eigen::VectorXd::Ones(6)) == 0.0);
}

TEST_CASE("prior draws have the target component variances") {
  const KraichnanPrior prior(FlowIndexSet(2.0), default_prior_params());
  Rng rng(17);
  const int n = 100000;
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(prior.size());
  for (int i = 0; i < n; ++i) sum2 += prior.sample(rng).array().square().matrix();
  for (Eigen::Index c = 2; c < 8; ++c) CHECK(sum2[c] / n == doctest::Approx(prior.variance()[c]).epsilon(0.05));
}

TEST_CASE("mean shell energy of prior draws") {
  // Each representative on the shell contributes E|v|^2 = sigma^2 / 2, so
  // E[shell] = reps(k) E(k) / (4 pi k).
  const KraichnanParams params = default_prior_params();
  const KraichnanPrior prior(FlowIndexSet(2.0), params);
  const int n = 10000;
  for (int shell : {1, 2}) {
    double sum = 0.0;
    Rng local(23 + shell);
    for (int i = 0; i < n; ++i) sum += shell_energy(sample_prior(prior, local), shell);
    int reps = 0;
    for (const auto& k : prior.index_set().representatives()) reps += k.norm_squared() == shell * shell;
    const double expect = reps * kraichnan_energy(shell, params.e0, params.n, params.xi) / (4 * kPi * shell);
    CHECK(sum / n == doctest::Approx(expect).epsilon(0.05));
  }
}

TEST_CASE("rng state survives serialization") {
  Rng a(99);
  for (int i = 0; i < 7; ++i) a.normal();
  Rng b = Rng::deserialize(a.serialize());
  CHECK(a == b);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.normal() == b.normal());
    CHECK(a.uniform() == b.uniform());
  }
  CHECK_THROWS(Rng::deserialize("not a state"));
}

TEST_CASE("potential examples") {
  const ObservationSpec spec{{0.3, {0.2, 0.6}}};
  const auto v = DivFreeVelocityField(Eigen::Vector2d(0.5, 0.0), {{{1, 1}, Complex(0.3, -0.2)}});
  const SolverConfig c = small_config();
  const Eigen::VectorXd g = forward_map(v, example_theta0(), spec, c);
  const NoiseModel noise{0.1};
  CHECK(potential(v, {g, spec}, noise, example_theta0(), c) == 0.0);
  CHECK(potential(v, {g.array() + 0.1, spec}, noise, example_theta0(), c) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(potential(v, {g, spec}, NoiseModel{0.0}, example_theta0(), c), InvalidArgument);
  CHECK_THROWS_AS(potential(v, {Eigen::VectorXd::Zero(2), spec}, noise, example_theta0(), c), IndexMismatch);
}

TEST_CASE("symmetric scenario potential is even") {
  const Scenario s = make_scenario("example2", "small", 1);
  const FlowIndexSet idx = s.index_set();
  const Eigen::VectorXd y = s.noiseless_data();
  PdeModel model(s.forward_problem(), idx, y, s.sigma_eta);
  const Eigen::VectorXd q = to_components(s.truth(), idx).values;
  const double plus = model.potential(q);
  const double minus = model.potential(-q);
  CHECK(std::abs(plus - minus) <= 1e-8 * std::max(1.0, plus));
}

TEST_CASE("data generation") {
  const auto v = DivFreeVelocityField(Eigen::Vector2d::Zero(), {{{0, 1}, Complex(0.7, 0.1)}});
  const ObservationSpec spec{{0.1, {0.3, 0.3}}, {0.5, {0.9, 0.2}}, {0.25, {0.0, 0.5}}};
  const SolverConfig c = small_config();
  const Eigen::VectorXd g = forward_map(v, example_theta0(), spec, c);
  Rng rng(4);
  CHECK(generate_data(v, example_theta0(), spec, {0.3}, c, false, rng).y == g);

  Rng r1(5), r2(5);
  const auto a = generate_data(v, example_theta0(), spec, {0.3}, c, true, r1);
  const auto b = generate_data(v, example_theta0(), spec, {0.3}, c, true, r2);
  CHECK(a.y == b.y);
  CHECK(a.y != g);
  Rng r3(5);
  const auto tiny = generate_data(v, example_theta0(), spec, {1e-12}, c, true, r3);
  CHECK((tiny.y - g).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("linear gaussian posterior") {
  Eigen::MatrixXd m(1, 1);
  m << 2.0;
  const LinearGaussianModel model(m, Eigen::VectorXd::Constant(1, 3.0), 0.5);
  const GaussianPrior prior(Eigen::VectorXd::Constant(1, 1.0));
  // precision = 1 + 4 / 0.25 = 17, mean = (2 * 3 / 0.25) / 17
  const auto post = model.posterior(prior);
  CHECK(post.covariance(0, 0) == doctest::Approx(1.0 / 17.0));
  CHECK(post.mean[0] == doctest::Approx(24.0 / 17.0));

  LinearGaussianModel copy = model;
  Eigen::VectorXd grad;
  const double phi = copy.potential_and_gradient(Eigen::VectorXd::Constant(1, 1.0), grad);
  CHECK(phi == doctest::Approx(0.5 * 1.0 / 0.25));
  CHECK(grad[0] == doctest::Approx(-2.0 * 1.0 / 0.25));
  CHECK(copy.counters() == SolveCounters{1, 1, 0});
}
