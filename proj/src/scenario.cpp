#include "flowinfer/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "flowinfer/errors.hpp"

namespace flowinfer {

using nlohmann::json;

namespace {

constexpr int kExample1Observations = 1024;

struct Reduction {
  double sampling_cutoff;
  int scalar_cutoff;
  double dt;
  std::size_t observations;  // 0 keeps all
};

int level_rank(const std::string& level) {
  if (level == "small") return 0;
  if (level == "medium") return 1;
  if (level == "paper") return 2;
  throw InvalidArgument("unknown level '" + level + "' (expected small, medium or paper)");
}

Reduction reduction_for(const std::string& name, const std::string& level) {
  const bool small = level == "small";
  if (name == "example1") {
    return small ? Reduction{4.0, 5, 1e-2, 256} : Reduction{6.0, 7, 5e-3, 512};
  }
  if (name == "example2") {
    return small ? Reduction{4.0, 5, 1e-3, 0} : Reduction{6.0, 7, 5e-4, 0};
  }
  throw InvalidArgument("no desk-scale reduction for scenario '" + name + "'");
}

json field_modes_json(const ScalarSpectralField& f) {
  json modes = json::array();
  const ScalarBasis basis(f.cutoff());
  const Complex c0 = f.at({0, 0});
  if (c0 != Complex(0.0)) modes.push_back({0, 0, c0.real(), c0.imag()});
  for (const WaveVector& k : basis.representatives()) {
    const Complex c = f.at(k);
    if (c != Complex(0.0)) modes.push_back({k.kx, k.ky, c.real(), c.imag()});
  }
  return json{{"cutoff", f.cutoff()}, {"modes", modes}};
}

ScalarSpectralField field_from_json(const json& j) {
  ScalarSpectralField f(j.at("cutoff").get<int>());
  for (const json& m : j.at("modes")) {
    const WaveVector k{m.at(0).get<int>(), m.at(1).get<int>()};
    const Complex c(m.at(2).get<double>(), m.at(3).get<double>());
    if (k.is_zero()) {
      f.set(k, c);
    } else {
      f.set_real_pair(k, c);
    }
  }
  return f;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// NaN is not representable in JSON; it is written as null.
json nullable_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (double x : v) {
    if (std::isfinite(x)) {
      out.push_back(x);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

Eigen::VectorXd nullable_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = j[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : j[i].get<double>();
  }
  return v;
}

}  // namespace

DivFreeVelocityField Scenario::truth() const { return from_components(true_components, FlowIndexSet(true_cutoff)); }

ForwardProblem Scenario::forward_problem() const {
  SolverConfig cfg = solver;
  cfg.kappa = kappa;
  return ForwardProblem(theta0, observations, cfg);
}

Eigen::VectorXd Scenario::noiseless_data() const { return forward_problem().forward_map(truth()); }

json Scenario::to_json() const {
  json obs = json::array();
  for (const ObservationPoint& p : observations) obs.push_back({{"t", p.t}, {"x", p.x[0]}, {"y", p.x[1]}});
  json truth = {{"cutoff", true_cutoff}, {"components", vector_json(true_components)}};
  if (!true_formula.empty()) truth["formula"] = true_formula;
  return json{
      {"name", name},
      {"level", level},
      {"kappa", kappa},
      {"sigma_eta", sigma_eta},
      {"theta0", field_modes_json(theta0)},
      {"prior", {{"e0", prior.e0}, {"n", prior.n}, {"xi", prior.xi}, {"mean_flow_var", prior.mean_flow_var}}},
      {"true_field", truth},
      {"observations", obs},
      {"sampling_cutoff", sampling_cutoff},
      {"solver", {{"cutoff", solver.scalar_cutoff}, {"dt", solver.dt}, {"t_final", solver.t_final}}},
      {"seeds", {{"scenario", seed}}},
      {"reference",
       {{"kernel", reference.kernel.to_json()},
        {"chains", reference.chains},
        {"steps", reference.steps},
        {"burn_in", reference.burn_in},
        {"thin", reference.thin}}},
  };
}

Scenario Scenario::from_json(const json& j) {
  try {
    Scenario s;
    s.name = j.at("name").get<std::string>();
    s.level = j.value("level", std::string("paper"));
    s.kappa = j.at("kappa").get<double>();
    s.sigma_eta = j.at("sigma_eta").get<double>();
    s.theta0 = field_from_json(j.at("theta0"));
    const json& p = j.at("prior");
    s.prior = {p.at("e0").get<double>(), p.at("n").get<int>(), p.at("xi").get<double>(),
               p.at("mean_flow_var").get<double>()};
    const json& t = j.at("true_field");
    s.true_cutoff = t.at("cutoff").get<double>();
    s.true_components = vector_from_json(t.at("components"));
    s.true_formula = t.value("formula", std::string());
    if (static_cast<std::size_t>(s.true_components.size()) != FlowIndexSet(s.true_cutoff).component_count()) {
      throw IndexMismatch("true_field component count does not match its cutoff");
    }
    for (const json& o : j.at("observations")) {
      s.observations.push_back({o.at("t").get<double>(), {o.at("x").get<double>(), o.at("y").get<double>()}});
    }
    s.sampling_cutoff = j.at("sampling_cutoff").get<double>();
    const json& sv = j.at("solver");
    s.solver.scalar_cutoff = sv.at("cutoff").get<int>();
    s.solver.dt = sv.at("dt").get<double>();
    s.solver.t_final = sv.at("t_final").get<double>();
    s.solver.kappa = s.kappa;
    s.seed = j.at("seeds").at("scenario").get<std::uint64_t>();
    if (j.contains("reference")) {
      const json& r = j.at("reference");
      s.reference.kernel = KernelParams::from_json(r.at("kernel"));
      s.reference.chains = r.at("chains").get<int>();
      s.reference.steps = r.at("steps").get<int>();
      s.reference.burn_in = r.value("burn_in", 0);
      s.reference.thin = r.value("thin", 1);
    }
    s.solver.validate();
    return s;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed scenario: ") + e.what());
  }
}

ScalarSpectralField example_theta0() {
  ScalarSpectralField f(1);
  f.set({0, 0}, 0.5);
  f.set_real_pair({1, 0}, -0.125);
  f.set_real_pair({0, 1}, -0.125);
  return f;
}

KraichnanParams default_prior_params() {
  KraichnanParams p;
  p.e0 = kraichnan_e0_for_unit_sigma(1.0, p.n, p.xi);
  return p;
}

Scenario example1(std::uint64_t seed) {
  Scenario s;
  s.name = "example1";
  s.seed = seed;
  s.kappa = 0.282;
  s.sigma_eta = std::ldexp(1.0, -6);
  s.theta0 = example_theta0();
  s.prior = default_prior_params();
  s.sampling_cutoff = 8.0;
  s.solver = SolverConfig{};
  s.solver.scalar_cutoff = 32;
  s.solver.dt = 1e-3;
  s.solver.t_final = 1.0;
  s.solver.kappa = s.kappa;

  Rng rng(seed);
  s.true_cutoff = 32.0;
  s.true_components = KraichnanPrior(FlowIndexSet(s.true_cutoff), s.prior).sample(rng);
  s.observations.reserve(kExample1Observations);
  for (int j = 0; j < kExample1Observations; ++j) {
    // uniform on [0, 1) mapped to (0, T]
    const double t = s.solver.t_final * (1.0 - rng.uniform());
    const double x = rng.uniform();
    const double y = rng.uniform();
    s.observations.push_back({t, {x, y}});
  }
  s.reference = {KernelParams{KernelKind::pcn, 0.15}, 40, 250000, 0};
  return s;
}

Scenario example2() {
  Scenario s;
  s.name = "example2";
  s.kappa = 3e-5;
  s.sigma_eta = std::ldexp(1.0, -3);
  s.theta0 = example_theta0();
  s.prior = default_prior_params();
  s.sampling_cutoff = 8.0;
  s.solver = SolverConfig{};
  s.solver.scalar_cutoff = 48;
  s.solver.dt = 2.5e-4;
  s.solver.t_final = 0.05;
  s.solver.kappa = s.kappa;

  // [8 cos 2 pi y, 8 cos 2 pi x]: k = (0,1) has k_perp/|k| = (-1, 0), k = (1,0) has (0, 1).
  s.true_cutoff = 1.0;
  const FlowIndexSet idx(s.true_cutoff);
  s.true_components = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.component_count()));
  s.true_components[2 + 2 * idx.slot({0, 1})] = -8.0;
  s.true_components[2 + 2 * idx.slot({1, 0})] = 8.0;
  s.true_formula = "example2";

  for (int i = 1; i <= 50; ++i) {
    const double t = i * 1e-3;
    s.observations.push_back({t, {0.0, 0.0}});
    s.observations.push_back({t, {0.5, 0.5}});
  }
  KernelParams hmc;
  hmc.kind = KernelKind::hmc;
  hmc.epsilon = 0.125;
  hmc.tau = 4.0;
  s.reference = {hmc, 100, 5000, 0};
  return s;
}

Scenario desk_scale(const Scenario& scenario, const std::string& level) {
  if (level != "small" && level != "medium") {
    throw InvalidArgument("unknown level '" + level + "' (expected small or medium)");
  }
  if (scenario.level == level) return scenario;
  if (level_rank(level) > level_rank(scenario.level)) {
    throw InvalidArgument("cannot enlarge a " + scenario.level + " scenario to " + level);
  }
  const Reduction r = reduction_for(scenario.name, level);
  Scenario s = scenario;
  s.level = level;
  s.sampling_cutoff = r.sampling_cutoff;
  s.solver.scalar_cutoff = r.scalar_cutoff;
  s.solver.dt = r.dt;
  if (r.observations > 0 && s.observations.size() > r.observations) s.observations.resize(r.observations);
  if (s.name == "example1") {
    s.reference = {KernelParams{KernelKind::pcn, 0.15}, 40, 5000, 0};
  } else {
    s.reference.chains = 20;
    s.reference.steps = 20000;
  }
  s.solver.validate();
  return s;
}

Scenario make_scenario(const std::string& name, const std::string& level, std::uint64_t seed) {
  level_rank(level);
  Scenario s;
  if (name == "example1") {
    s = example1(seed);
  } else if (name == "example2") {
    s = example2();
  } else {
    throw InvalidArgument("unknown scenario '" + name + "' (expected example1 or example2)");
  }
  return level == "paper" ? s : desk_scale(s, level);
}

PdeModel make_model(const Scenario& scenario, const Eigen::VectorXd& y) {
  return PdeModel(scenario.forward_problem(), scenario.index_set(), y, scenario.sigma_eta);
}

json ReferenceArtifacts::to_json() const {
  json hist = json::array();
  for (const Histogram1D& h : histograms) hist.push_back(h.to_json());
  return json{{"samples", samples},
              {"chains", chains},
              {"histograms", hist},
              {"observable_means", observable_means},
              {"moments",
               {{"mean", nullable_json(moments.mean)},
                {"variance", nullable_json(moments.variance)},
                {"skewness", nullable_json(moments.skewness)},
                {"excess_kurtosis", nullable_json(moments.excess_kurtosis)}}}};
}

ReferenceArtifacts ReferenceArtifacts::from_json(const json& j) {
  try {
    ReferenceArtifacts r;
    r.samples = j.at("samples").get<std::size_t>();
    r.chains = j.at("chains").get<int>();
    r.observable_means = j.value("observable_means", std::map<std::string, double>{});
    for (const json& h : j.at("histograms")) r.histograms.push_back(Histogram1D::from_json(h));
    const json& m = j.at("moments");
    r.moments.mean = nullable_from_json(m.at("mean"));
    r.moments.variance = nullable_from_json(m.at("variance"));
    r.moments.skewness = nullable_from_json(m.at("skewness"));
    r.moments.excess_kurtosis = nullable_from_json(m.at("excess_kurtosis"));
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed reference: ") + e.what());
  }
}

std::vector<Histogram1D> reference_edges(const MomentSummary& m, int bins) {
  std::vector<Histogram1D> out;
  for (Eigen::Index i = 0; i < m.mean.size(); ++i) {
    const double sd = std::sqrt(std::max(m.variance[i], 0.0));
    const double half = sd > 0.0 ? 4.0 * sd : 1.0;
    out.emplace_back(m.mean[i] - half, m.mean[i] + half, bins);
  }
  return out;
}

std::vector<std::pair<std::string, double>> flow_observables(const Eigen::VectorXd& q, const FlowIndexSet& idx) {
  const DivFreeVelocityField f = from_components(q, idx);
  return {{"enstrophy", enstrophy(f)}, {"enstrophy_dissipation", enstrophy_dissipation(f)}};
}

ReferenceArtifacts summarize_reference(const std::vector<Eigen::VectorXd>& pooled, int chains,
                                       const FlowIndexSet& idx) {
  if (pooled.empty()) throw InvalidArgument("reference needs at least one sample");
  ReferenceArtifacts r;
  for (const Eigen::VectorXd& q : pooled) {
    for (const auto& [name, value] : flow_observables(q, idx)) r.observable_means[name] += value;
  }
  for (auto& [name, sum] : r.observable_means) sum /= static_cast<double>(pooled.size());
  r.moments = moments(pooled);
  r.histograms = reference_edges(r.moments);
  for (const Eigen::VectorXd& q : pooled) {
    for (Eigen::Index i = 0; i < q.size(); ++i) r.histograms[static_cast<std::size_t>(i)].add(q[i]);
  }
  r.samples = pooled.size();
  r.chains = chains;
  return r;
}

ReferenceArtifacts build_reference(const Scenario& scenario, const Eigen::VectorXd& y, const ReferenceBudget& budget,
                                   std::uint64_t seed_base, int workers) {
  if (budget.chains < 1 || budget.steps < 1 || budget.burn_in < 0 || budget.burn_in >= budget.steps) {
    throw InvalidArgument("reference budget must be chains x steps with burn_in < steps");
  }
  if (budget.thin < 1 || budget.burn_in % budget.thin != 0) {
    throw InvalidArgument("reference thin must be positive and divide burn_in");
  }
  budget.kernel.validate();
  const KraichnanPrior prior = scenario.make_prior();
  std::vector<std::vector<Eigen::VectorXd>> per_chain(static_cast<std::size_t>(budget.chains));

  std::mutex mu;
  int next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    PdeModel model = make_model(scenario, y);
    for (;;) {
      int c;
      {
        std::lock_guard lock(mu);
        if (next >= budget.chains || error) return;
        c = next++;
      }
      try {
        ChainOptions opt;
        opt.n_steps = budget.steps;
        opt.seed = seed_base ^ static_cast<std::uint64_t>(c);
        opt.thin = budget.thin;
        ChainRecord rec = run_chain(std::nullopt, budget.kernel, opt, prior, model);
        const auto drop = std::min<std::size_t>(static_cast<std::size_t>(budget.burn_in / budget.thin),
                                                 rec.samples.size());
        rec.samples.erase(rec.samples.begin(), rec.samples.begin() + static_cast<std::ptrdiff_t>(drop));
        per_chain[static_cast<std::size_t>(c)] = std::move(rec.samples);
      } catch (...) {
        std::lock_guard lock(mu);
        error = std::current_exception();
      }
    }
  };
  const int n = std::clamp(workers, 1, budget.chains);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<Eigen::VectorXd> pooled;
  for (auto& chain : per_chain) {
    for (auto& q : chain) pooled.push_back(std::move(q));
  }
  return summarize_reference(pooled, budget.chains, scenario.index_set());
}

}  // namespace flowinfer
