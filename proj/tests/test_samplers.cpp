#include <cmath>

#include "doctest.h"
#include "flowinfer/errors.hpp"
#include "flowinfer/samplers.hpp"

using namespace flowinfer;

namespace {

// Phi is the constant 0.5 |y|^2 / sigma^2 when the forward matrix is zero.
LinearGaussianModel flat_model(Eigen::Index d) {
  return LinearGaussianModel(Eigen::MatrixXd::Zero(1, d), Eigen::VectorXd::Constant(1, 0.3), 1.0);
}

LinearGaussianModel toy_model() {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.5, -0.3, 2.0;
  Eigen::VectorXd y(2);
  y << 0.7, -1.1;
  return LinearGaussianModel(m, y, 0.8);
}

GaussianPrior toy_prior() { return GaussianPrior(Eigen::Vector2d(1.0, 0.6)); }

KernelParams kernel(KernelKind kind) {
  KernelParams p;
  p.kind = kind;
  p.beta = 0.4;
  p.h = 0.05;
  p.epsilon = 0.25;
  p.tau = 1.0;
  return p;
}

ChainOptions options(int steps, std::uint64_t seed) {
  ChainOptions o;
  o.n_steps = steps;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("kernel names and parameter validation") {
  for (auto kind : {KernelKind::pcn, KernelKind::is, KernelKind::mala, KernelKind::hmc}) {
    CHECK(parse_kernel(to_string(kind)) == kind);
    const KernelParams p = kernel(kind);
    const KernelParams back = KernelParams::from_json(p.to_json());
    CHECK(back.kind == kind);
    CHECK(back.to_json() == p.to_json());
  }
  CHECK_THROWS_AS(parse_kernel("gibbs"), InvalidArgument);
  KernelParams p = kernel(KernelKind::pcn);
  p.beta = 1.5;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = kernel(KernelKind::hmc);
  p.tau = 0.1;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = kernel(KernelKind::hmc);
  CHECK(p.leapfrog_steps() == 4);
  p.epsilon = 0.125;
  p.tau = 4.0;
  CHECK(p.leapfrog_steps() == 32);
}

TEST_CASE("constant potential is always accepted") {
  const GaussianPrior prior(Eigen::Vector3d(1.0, 2.0, 0.5));
  for (auto kind : {KernelKind::pcn, KernelKind::is, KernelKind::mala, KernelKind::hmc}) {
    LinearGaussianModel model = flat_model(3);
    const ChainRecord r = run_chain(std::nullopt, kernel(kind), options(200, 3), prior, model);
    CHECK(r.acceptance_rate() == 1.0);
  }
}

TEST_CASE("pCN with beta one is the independence sampler") {
  const GaussianPrior prior = toy_prior();
  LinearGaussianModel m1 = toy_model(), m2 = toy_model();
  Rng r1(7), r2(7);
  ChainState s1 = make_state(Eigen::Vector2d(0.1, 0.2), false, m1);
  ChainState s2 = s1;
  for (int i = 0; i < 500; ++i) {
    const bool a = pcn_step(s1, 1.0, prior, r1, m1);
    const bool b = is_step(s2, prior, r2, m2);
    REQUIRE(a == b);
    REQUIRE(s1.q == s2.q);
    REQUIRE(s1.phi == s2.phi);
  }
}

TEST_CASE("tiny steps are almost always accepted") {
  const GaussianPrior prior = toy_prior();
  LinearGaussianModel model = toy_model();
  KernelParams p = kernel(KernelKind::pcn);
  p.beta = 1e-6;
  CHECK(run_chain(Eigen::Vector2d(0.3, -0.2), p, options(500, 1), prior, model).acceptance_rate() >= 0.99);
  p = kernel(KernelKind::mala);
  p.h = 1e-10;
  CHECK(run_chain(Eigen::Vector2d(0.3, -0.2), p, options(500, 1), prior, model).acceptance_rate() >= 0.99);
}

TEST_CASE("mala correction with zero gradient is the potential") {
  const GaussianPrior prior = toy_prior();
  const Eigen::Vector2d v(0.3, 1.0), w(-0.4, 2.0);
  CHECK(mala_rho(v, w, 1.7, Eigen::Vector2d::Zero(), 0.1, prior) == 1.7);
}

TEST_CASE("hmc exact rotation preserves the prior norm") {
  // With Phi constant every trajectory is a rotation, so H is conserved and nothing is rejected.
  const GaussianPrior prior(Eigen::Vector4d(0.3, 1.0, 2.0, 5.0));
  LinearGaussianModel model = flat_model(4);
  Rng rng(2);
  ChainState s = make_state(Eigen::Vector4d(0.5, -1.0, 3.0, 2.0), false, model);
  for (int i = 0; i < 100; ++i) CHECK(hmc_step(s, 0.3, 0.3, prior, rng, model));
}

TEST_CASE("chain bookkeeping and solve counters") {
  const GaussianPrior prior = toy_prior();
  const int n = 50;
  struct Expect {
    KernelKind kind;
    long long fwd, adj, init_fwd, init_adj;
  };
  for (const Expect& e : {Expect{KernelKind::pcn, n, 0, 1, 0}, Expect{KernelKind::is, n, 0, 1, 0},
                          Expect{KernelKind::mala, n, n, 1, 1}, Expect{KernelKind::hmc, 5 * n, 4 * n, 1, 0}}) {
    LinearGaussianModel model = toy_model();
    ChainOptions o = options(n, 9);
    o.thin = 5;
    const ChainRecord r = run_chain(std::nullopt, kernel(e.kind), o, prior, model);
    CHECK(r.steps_done == n);
    CHECK(r.phis.size() == static_cast<std::size_t>(n));
    CHECK(r.accepts.size() == static_cast<std::size_t>(n));
    CHECK(r.samples.size() == static_cast<std::size_t>(n / 5));
    CHECK(r.counters == SolveCounters{e.fwd, e.adj, 0});
    CHECK(r.init_counters == SolveCounters{e.init_fwd, e.init_adj, 0});
    double mean = 0.0;
    for (auto a : r.accepts) mean += a;
    CHECK(r.acceptance_rate() == doctest::Approx(mean / n));
  }
  LinearGaussianModel model = toy_model();
  CHECK(run_chain(std::nullopt, kernel(KernelKind::pcn), options(1, 1), prior, model).samples.size() == 1);
  CHECK_THROWS_AS(run_chain(std::nullopt, kernel(KernelKind::pcn), options(0, 1), prior, model), InvalidArgument);
  CHECK_THROWS_AS(run_chain(Eigen::Vector3d::Zero(), kernel(KernelKind::pcn), options(5, 1), prior, model),
                  IndexMismatch);
}

TEST_CASE("chains are deterministic given the seed") {
  const GaussianPrior prior = toy_prior();
  for (auto kind : {KernelKind::pcn, KernelKind::mala, KernelKind::hmc}) {
    LinearGaussianModel m1 = toy_model(), m2 = toy_model();
    const ChainRecord a = run_chain(std::nullopt, kernel(kind), options(300, 42), prior, m1);
    const ChainRecord b = run_chain(std::nullopt, kernel(kind), options(300, 42), prior, m2);
    CHECK(a.samples == b.samples);
    CHECK(a.phis == b.phis);
    CHECK(a.accepts == b.accepts);
    LinearGaussianModel m3 = toy_model();
    const ChainRecord c = run_chain(std::nullopt, kernel(kind), options(300, 43), prior, m3);
    CHECK(a.samples != c.samples);
  }
}

TEST_CASE("resuming a checkpoint reproduces the uninterrupted chain") {
  const GaussianPrior prior = toy_prior();
  for (auto kind : {KernelKind::pcn, KernelKind::mala, KernelKind::hmc}) {
    LinearGaussianModel m1 = toy_model();
    const ChainRecord full = run_chain(std::nullopt, kernel(kind), options(400, 5), prior, m1);

    LinearGaussianModel m2 = toy_model();
    ChainOptions first = options(400, 5);
    first.stop_after = 150;
    first.checkpoint_every = 50;
    std::optional<ChainCheckpoint> saved;
    first.on_checkpoint = [&](const ChainCheckpoint& cp) { saved = cp; };
    const ChainRecord partial = run_chain(std::nullopt, kernel(kind), first, prior, m2);
    CHECK(partial.steps_done == 150);
    REQUIRE(saved);
    CHECK(saved->record.steps_done == 150);

    LinearGaussianModel m3 = toy_model();
    const ChainRecord resumed = resume_chain(*saved, options(400, 5), prior, m3);
    CHECK(resumed.samples == full.samples);
    CHECK(resumed.phis == full.phis);
    CHECK(resumed.accepts == full.accepts);
    CHECK(resumed.counters == full.counters);
  }
}

TEST_CASE("failed evaluations are rejected and counted") {
  struct Failing : PosteriorModel {
    Eigen::Index dimension() const override { return 2; }
    double potential(const Eigen::VectorXd& q) override {
      ++counters_.forward;
      return q[0] > 0.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    }
    double potential_and_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) override {
      ++counters_.adjoint;
      grad = Eigen::Vector2d::Zero();
      return potential(q);
    }
  };
  const GaussianPrior prior = toy_prior();
  Failing model;
  const ChainRecord r = run_chain(Eigen::Vector2d(-1.0, 0.0), kernel(KernelKind::is), options(400, 1), prior, model);
  for (const auto& q : r.samples) CHECK(q[0] <= 0.0);
  CHECK(r.counters.failures > 100);
  CHECK(r.counters.failures < 300);
}
