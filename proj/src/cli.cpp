#include "flowinfer/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "flowinfer/adjoint.hpp"
#include "flowinfer/chain_io.hpp"
#include "flowinfer/diagnostics.hpp"
#include "flowinfer/errors.hpp"
#include "flowinfer/scenario.hpp"

namespace flowinfer {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> parse_components(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || v < 0) throw InvalidArgument("bad component list '" + text + "'");
    return v;
  };
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(part));
      continue;
    }
    const int lo = to_int(part.substr(0, dots));
    const int hi = to_int(part.substr(dots + 2));
    if (hi < lo) throw InvalidArgument("bad component range '" + part + "'");
    for (int c = lo; c <= hi; ++c) out.push_back(c);
  }
  if (out.empty()) throw InvalidArgument("empty component list");
  return out;
}

namespace {

std::string chain_dir_name(int c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "chain_%03d", c);
  return buf;
}

Scenario load_scenario(const std::string& path) { return Scenario::from_json(read_json(path)); }

Eigen::VectorXd load_data(const Scenario& s, const std::string& path) {
  if (path.empty()) return s.noiseless_data();
  const DataSet d = read_data_csv(path);
  if (d.spec.size() != s.observations.size()) {
    throw IndexMismatch("data file has " + std::to_string(d.spec.size()) + " rows, scenario has " +
                        std::to_string(s.observations.size()) + " observations");
  }
  return d.y;
}

int default_workers(int requested, int chains) {
  const int hw = std::max(1u, std::thread::hardware_concurrency());
  return std::clamp(requested > 0 ? requested : hw, 1, std::max(1, chains));
}

// ---- scenario --------------------------------------------------------------

struct ScenarioArgs {
  std::string name;
  std::string level = "paper";
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_scenario(const ScenarioArgs& a, std::ostream& out) {
  const Scenario s = make_scenario(a.name, a.level, a.seed);
  write_json(a.out, s.to_json());
  out << "wrote " << a.out << " (" << s.observations.size() << " observations, " << s.index_set().component_count()
      << " components)\n";
  return kExitOk;
}

// ---- generate-data ---------------------------------------------------------

struct DataArgs {
  std::string scenario;
  std::string out;
  bool add_noise = false;
  std::uint64_t seed = 0;
};

int cmd_generate_data(const DataArgs& a, std::ostream& out) {
  const Scenario s = load_scenario(a.scenario);
  Eigen::VectorXd y = s.noiseless_data();
  if (a.add_noise) {
    Rng rng(a.seed);
    for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += s.sigma_eta * rng.normal();
  }
  write_text_atomic(a.out, data_csv(s.observations, y));
  out << "wrote " << a.out << " (" << y.size() << " values)\n";
  return kExitOk;
}

// ---- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string scenario;
  std::string data;
  bool no_data = false;
  std::string kernel = "pcn";
  KernelParams params;
  int steps = 1000;
  int chains = 1;
  std::uint64_t seed = 0;
  std::string out;
  bool resume = false;
  int thin = 1;
  int checkpoint_every = 1000;
  int stop_after = -1;
  int workers = 0;
  std::string init_from;
};

void write_chain_outputs(const fs::path& dir, const ChainRecord& rec) {
  write_text_atomic(dir / "samples.csv", samples_csv(rec));
  write_text_atomic(dir / "trace.csv", trace_csv(rec));
  write_json(dir / "manifest.json", chain_manifest(rec));
}

int cmd_sample(SampleArgs a, std::ostream& out) {
  a.params.kind = parse_kernel(a.kernel);
  a.params.validate();
  if (a.chains < 1 || a.steps < 1 || a.thin < 1) throw InvalidArgument("chains, steps and thin must be positive");
  Scenario s = load_scenario(a.scenario);
  if (a.no_data) s.observations.clear();
  const Eigen::VectorXd y = a.no_data ? Eigen::VectorXd() : load_data(s, a.data);
  const KraichnanPrior prior = s.make_prior();
  const fs::path root(a.out);
  std::optional<Eigen::VectorXd> initial;
  if (!a.init_from.empty()) {
    const auto rows = read_samples_csv(a.init_from);
    if (rows.empty()) throw IoError(a.init_from + " holds no samples");
    if (rows.back().size() != prior.size()) throw IndexMismatch("initial state length does not match the scenario");
    initial = rows.back();
  }

  std::vector<ChainRecord> records(static_cast<std::size_t>(a.chains));
  std::mutex mu;
  int next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    PdeModel model = make_model(s, y);
    for (;;) {
      int c;
      {
        std::lock_guard lock(mu);
        if (next >= a.chains || error) return;
        c = next++;
      }
      try {
        const fs::path dir = root / chain_dir_name(c);
        ChainOptions opt;
        opt.n_steps = a.steps;
        opt.seed = a.seed ^ static_cast<std::uint64_t>(c);
        opt.thin = a.thin;
        opt.checkpoint_every = a.checkpoint_every;
        opt.stop_after = a.stop_after;
        opt.on_checkpoint = [&dir](const ChainCheckpoint& cp) { write_json(dir / "checkpoint.json", checkpoint_to_json(cp)); };
        ChainRecord rec;
        const fs::path cp_path = dir / "checkpoint.json";
        if (a.resume && fs::exists(cp_path)) {
          ChainCheckpoint cp = checkpoint_from_json(read_json(cp_path));
          if (cp.record.seed != opt.seed || cp.record.params.to_json() != a.params.to_json() ||
              cp.record.thin != a.thin) {
            throw InvalidArgument("checkpoint in " + dir.string() + " was written with different settings");
          }
          rec = resume_chain(std::move(cp), opt, prior, model);
        } else {
          rec = run_chain(initial, a.params, opt, prior, model);
        }
        write_chain_outputs(dir, rec);
        records[static_cast<std::size_t>(c)] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(mu);
        error = std::current_exception();
      }
    }
  };
  const int n = default_workers(a.workers, a.chains);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  json chains = json::array();
  SolveCounters total;
  bool complete = true;
  for (const ChainRecord& r : records) {
    chains.push_back(chain_manifest(r));
    total += r.counters;
    total += r.init_counters;
    complete = complete && r.steps_done == a.steps;
  }
  write_json(root / "manifest.json",
             json{{"scenario", s.name},
                  {"level", s.level},
                  {"kernel", a.params.to_json()},
                  {"steps", a.steps},
                  {"chains", a.chains},
                  {"seed_base", a.seed},
                  {"seed_derivation", "chain seed = seed_base xor chain index"},
                  {"observations", s.observations.size()},
                  {"complete", complete},
                  {"total_solves", {{"forward", total.forward}, {"adjoint", total.adjoint}, {"failures", total.failures}}},
                  {"chain_manifests", chains}});
  for (std::size_t c = 0; c < records.size(); ++c) {
    out << chain_dir_name(static_cast<int>(c)) << ": " << records[c].steps_done << " steps, acceptance "
        << records[c].acceptance_rate() << "\n";
  }
  return kExitOk;
}

// ---- gradient-check --------------------------------------------------------

struct GradArgs {
  std::string scenario;
  int trials = 20;
  double h = 1e-3;
  double cutoff = 2.0;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  std::string out;
  int corrupt_sign = -1;
  bool zero_residual = false;
};

// Built-in setup: Example-1 physics on a short window with random observations.
Scenario gradient_check_setup(double cutoff, Rng& rng) {
  Scenario s;
  s.name = "gradient-check";
  s.kappa = 0.282;
  s.sigma_eta = std::ldexp(1.0, -6);
  s.theta0 = example_theta0();
  s.prior = default_prior_params();
  s.sampling_cutoff = cutoff;
  s.solver.dt = 1e-3;
  s.solver.t_final = 0.1;
  s.solver.scalar_cutoff = FlowIndexSet(cutoff).max_norm_extent() + 4;
  s.solver.kappa = s.kappa;
  for (int j = 0; j < 20; ++j) {
    const double t = s.solver.t_final * (1.0 - rng.uniform());
    const double x = rng.uniform();
    const double y = rng.uniform();
    s.observations.push_back({t, {x, y}});
  }
  return s;
}

int cmd_gradient_check(const GradArgs& a, std::ostream& out) {
  if (!(a.h > 0.0)) throw InvalidArgument("--h must be positive");
  if (a.trials < 1) throw InvalidArgument("--trials must be positive");
  Rng rng(a.seed);
  Scenario s = a.scenario.empty() ? gradient_check_setup(a.cutoff, rng) : load_scenario(a.scenario);
  const FlowIndexSet idx = s.index_set();
  const KraichnanPrior prior = s.make_prior();
  const ForwardProblem problem = s.forward_problem();
  const Eigen::VectorXd scenario_data =
      a.scenario.empty() || a.zero_residual ? Eigen::VectorXd() : s.noiseless_data();
  if (a.corrupt_sign >= static_cast<int>(idx.component_count())) throw InvalidArgument("--corrupt-sign out of range");

  std::string report = "trial,component,adjoint,fd,error\n";
  double worst = 0.0;
  for (int trial = 0; trial < a.trials; ++trial) {
    Eigen::VectorXd q = prior.sample(rng);
    q[0] = rng.normal();
    q[1] = rng.normal();
    Eigen::VectorXd y;
    if (a.zero_residual) {
      y = problem.forward_map(from_components(q, idx));
    } else if (!scenario_data.size() && a.scenario.empty()) {
      // data from an independent prior draw plus noise
      Eigen::VectorXd other = prior.sample(rng);
      y = problem.forward_map(from_components(other, idx));
      for (Eigen::Index j = 0; j < y.size(); ++j) y[j] += s.sigma_eta * rng.normal();
    } else {
      y = scenario_data;
    }
    GradientCheck g = check_gradient(problem, idx, y, s.sigma_eta, q, a.h, a.tolerance);
    if (a.corrupt_sign >= 0) {
      const Eigen::Index c = a.corrupt_sign;
      g.adjoint[c] = -g.adjoint[c];
      g.error[c] = std::abs(g.adjoint[c] - g.finite_difference[c]) /
                   std::max(std::abs(g.finite_difference[c]), 1e-8 / a.tolerance);
    }
    for (Eigen::Index c = 0; c < q.size(); ++c) {
      report += std::to_string(trial) + ',' + std::to_string(c) + ',' + format_double(g.adjoint[c]) + ',' +
                format_double(g.finite_difference[c]) + ',' + format_double(g.error[c]) + '\n';
      worst = std::max(worst, g.error[c]);
    }
  }
  if (!a.out.empty()) write_text_atomic(a.out, report);
  const bool pass = worst <= a.tolerance;
  out << "gradient-check: " << a.trials << " trials, " << idx.component_count() << " components, max error " << worst
      << (pass ? " PASS" : " FAIL") << "\n";
  return pass ? kExitOk : kExitNumerical;
}

// ---- diagnose ----------------------------------------------------------------

struct DiagnoseArgs {
  std::string chains;
  std::string reference;
  std::string scenario;
  std::string out;
  std::string components = "2..9";
  int max_lag = 200;
  int tv_points = 20;
  int chain = 0;
};

std::vector<fs::path> chain_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (!fs::is_directory(root)) throw IoError(root.string() + " is not a directory");
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().filename().string().rfind("chain_", 0) == 0 &&
        fs::exists(e.path() / "samples.csv")) {
      dirs.push_back(e.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError("no chain_* directories with samples.csv under " + root.string());
  return dirs;
}

std::string histogram_csv(const Histogram1D& h) {
  std::string s = "bin,lo,hi,density\n";
  const auto d = h.density();
  for (int i = 0; i < h.bins(); ++i) {
    s += std::to_string(i) + ',' + format_double(h.edge(i)) + ',' + format_double(h.edge(i + 1)) + ',' +
         format_double(d[static_cast<std::size_t>(i)]) + '\n';
  }
  return s;
}

std::string histogram2d_csv(const Histogram2D& h) {
  std::string s = "xbin,ybin,x_lo,x_hi,y_lo,y_hi,density\n";
  const auto d = h.density();
  const Histogram1D& x = h.x_axis();
  const Histogram1D& y = h.y_axis();
  for (int i = 0; i < x.bins(); ++i) {
    for (int j = 0; j < y.bins(); ++j) {
      s += std::to_string(i) + ',' + std::to_string(j) + ',' + format_double(x.edge(i)) + ',' +
           format_double(x.edge(i + 1)) + ',' + format_double(y.edge(j)) + ',' + format_double(y.edge(j + 1)) + ',' +
           format_double(d[static_cast<std::size_t>(i * y.bins() + j)]) + '\n';
    }
  }
  return s;
}

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out, std::ostream& err) {
  const auto dirs = chain_dirs(a.chains);
  if (a.chain < 0 || static_cast<std::size_t>(a.chain) >= dirs.size()) throw InvalidArgument("--chain out of range");
  std::vector<std::vector<Eigen::VectorXd>> chains;
  std::vector<int> steps0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    chains.push_back(read_samples_csv(dirs[i] / "samples.csv", i == static_cast<std::size_t>(a.chain) ? &steps0 : nullptr));
  }
  std::vector<Eigen::VectorXd> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.empty()) throw InvalidArgument("chains contain no samples");
  const Eigen::Index dim = pooled.front().size();
  for (const auto& q : pooled) {
    if (q.size() != dim) throw IndexMismatch("chains have different dimensions");
  }

  std::vector<int> comps;
  for (int c : parse_components(a.components)) {
    if (c < dim) comps.push_back(c);
  }
  const fs::path root(a.out);
  const MomentSummary m = moments(pooled);

  std::optional<ReferenceArtifacts> ref;
  if (!a.reference.empty()) {
    ref = ReferenceArtifacts::from_json(read_json(a.reference));
    if (static_cast<Eigen::Index>(ref->histograms.size()) != dim) {
      throw IndexMismatch("reference has " + std::to_string(ref->histograms.size()) + " histograms, chains have " +
                          std::to_string(dim) + " components");
    }
  }
  const std::vector<Histogram1D> edges = ref ? ref->histograms : reference_edges(m);

  // trace and autocorrelation of the selected chain
  const fs::path chosen = dirs[static_cast<std::size_t>(a.chain)];
  const auto trace = read_trace_csv(chosen / "trace.csv");
  std::string trace_text = "step,phi,accept\n";
  std::vector<double> phis;
  for (const TraceRow& r : trace) {
    trace_text += std::to_string(r.step) + ',' + format_double(r.phi) + ',' + std::to_string(r.accept) + '\n';
    phis.push_back(r.phi);
  }
  write_text_atomic(root / "trace.csv", trace_text);
  std::string acf_text = "lag,value\n";
  if (!phis.empty()) {
    try {
      const auto acf = autocorrelation(phis, std::min<int>(a.max_lag, static_cast<int>(phis.size()) - 1));
      for (std::size_t k = 0; k < acf.size(); ++k) acf_text += std::to_string(k) + ',' + format_double(acf[k]) + '\n';
    } catch (const InvalidArgument& e) {
      err << "acf skipped: " << e.what() << "\n";
    }
  }
  write_text_atomic(root / "acf.csv", acf_text);

  std::string mom = "component,mean,var,skew,exkurt\n";
  for (Eigen::Index c = 0; c < dim; ++c) {
    mom += std::to_string(c) + ',' + format_double(m.mean[c]) + ',' + format_double(m.variance[c]) + ',' +
           format_double(m.skewness[c]) + ',' + format_double(m.excess_kurtosis[c]) + '\n';
  }
  write_text_atomic(root / "moments.csv", mom);

  for (int c : comps) {
    const Histogram1D& e = edges[static_cast<std::size_t>(c)];
    Histogram1D h(e.lo(), e.hi(), e.bins());
    for (const auto& q : pooled) h.add(q[c]);
    write_text_atomic(root / ("hist1d_" + std::to_string(c) + ".csv"), histogram_csv(h));
  }
  for (std::size_t i = 0; i < comps.size(); ++i) {
    for (std::size_t j = i + 1; j < comps.size(); ++j) {
      const Histogram1D& ex = edges[static_cast<std::size_t>(comps[i])];
      const Histogram1D& ey = edges[static_cast<std::size_t>(comps[j])];
      Histogram2D h(Histogram1D(ex.lo(), ex.hi(), ex.bins()), Histogram1D(ey.lo(), ey.hi(), ey.bins()));
      for (const auto& q : pooled) h.add(q[comps[i]], q[comps[j]]);
      write_text_atomic(root / ("hist2d_" + std::to_string(comps[i]) + "_" + std::to_string(comps[j]) + ".csv"),
                        histogram2d_csv(h));
    }
  }

  if (ref) {
    std::size_t longest = 0;
    for (const auto& c : chains) longest = std::max(longest, c.size());
    const auto prefixes = prefix_grid(longest, a.tv_points);
    const Eigen::MatrixXd tv = tv_evolution(chains, ref->histograms, comps, prefixes);
    std::string text = "step";
    for (int c : comps) text += ",tv_" + std::to_string(c);
    text += '\n';
    const int thin = steps0.empty() ? 1 : steps0.front();
    for (std::size_t r = 0; r < prefixes.size(); ++r) {
      text += std::to_string(prefixes[r] * static_cast<std::size_t>(thin));
      for (Eigen::Index c = 0; c < tv.cols(); ++c) text += ',' + format_double(tv(static_cast<Eigen::Index>(r), c));
      text += '\n';
    }
    write_text_atomic(root / "tv_evolution.csv", text);
  }

  if (!a.scenario.empty()) {
    const Scenario s = load_scenario(a.scenario);
    const FlowIndexSet idx = s.index_set();
    if (static_cast<Eigen::Index>(idx.component_count()) != dim) {
      throw IndexMismatch("scenario sampling cutoff does not match chain dimension");
    }
    const auto& chain = chains[static_cast<std::size_t>(a.chain)];
    std::map<std::string, std::vector<double>> series;
    std::vector<std::string> names;
    for (const auto& q : chain) {
      for (const auto& [name, value] : flow_observables(q, idx)) {
        if (series[name].empty()) names.push_back(name);
        series[name].push_back(value);
      }
    }
    std::string text = "step,name,value,cma,rel_err\n";
    for (const std::string& name : names) {
      const auto& v = series[name];
      double truth = 0.0;
      if (ref && ref->observable_means.count(name)) {
        truth = ref->observable_means.at(name);
      } else {
        for (double x : v) truth += x;
        truth /= static_cast<double>(v.size());
      }
      const RelativeErrorSeries rel = cumulative_relative_error(v, truth);
      double sum = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        sum += v[i];
        text += std::to_string(steps0[i]) + ',' + name + ',' + format_double(v[i]) + ',' +
                format_double(sum / static_cast<double>(i + 1)) + ',' + format_double(rel.values[i]) + '\n';
      }
    }
    write_text_atomic(root / "observables.csv", text);
  }
  out << "diagnostics for " << dirs.size() << " chains (" << pooled.size() << " samples) written to " << a.out << "\n";
  return kExitOk;
}

// ---- reference ---------------------------------------------------------------

struct ReferenceArgs {
  std::string scenario;
  std::string data;
  std::string from_chains;
  std::string out;
  std::string kernel;
  KernelParams params;
  bool beta_set = false;
  int chains = -1;
  int steps = -1;
  int burn_in = -1;
  int thin = 0;
  std::uint64_t seed = 0;
  int workers = 0;
};

int cmd_reference(const ReferenceArgs& a, std::ostream& out) {
  const Scenario s = load_scenario(a.scenario);
  ReferenceArtifacts ref;
  if (!a.from_chains.empty()) {
    std::vector<Eigen::VectorXd> pooled;
    const auto dirs = chain_dirs(a.from_chains);
    for (const auto& d : dirs) {
      auto c = read_samples_csv(d / "samples.csv");
      pooled.insert(pooled.end(), c.begin(), c.end());
    }
    ref = summarize_reference(pooled, static_cast<int>(dirs.size()), s.index_set());
  } else {
    ReferenceBudget budget = s.reference;
    if (!a.kernel.empty()) {
      budget.kernel = a.params;
      budget.kernel.kind = parse_kernel(a.kernel);
    }
    if (a.chains > 0) budget.chains = a.chains;
    if (a.steps > 0) budget.steps = a.steps;
    if (a.burn_in >= 0) budget.burn_in = a.burn_in;
    if (a.thin > 0) budget.thin = a.thin;
    ref = build_reference(s, load_data(s, a.data), budget, a.seed, default_workers(a.workers, budget.chains));
  }
  write_json(a.out, ref.to_json());
  out << "reference: " << ref.samples << " pooled samples from " << ref.chains << " chains written to " << a.out
      << "\n";
  return kExitOk;
}

void add_kernel_flags(CLI::App* cmd, std::string& kernel, KernelParams& p) {
  cmd->add_option("--kernel", kernel, "pcn, is, mala or hmc");
  cmd->add_option("--beta", p.beta, "pCN step size");
  cmd->add_option("--h", p.h, "MALA step size");
  cmd->add_option("--epsilon", p.epsilon, "HMC integration step");
  cmd->add_option("--tau", p.tau, "HMC integration time");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Bayesian inference of a stationary flow from passive-scalar observations", "flowinfer");
  app.require_subcommand(1);
  app.set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h

  ScenarioArgs sc;
  auto* c_scn = app.add_subcommand("scenario", "Write a canned scenario as JSON");
  c_scn->add_option("--name", sc.name, "example1 or example2")->required();
  c_scn->add_option("--level", sc.level, "small, medium or paper");
  c_scn->add_option("--seed", sc.seed, "scenario seed (truth field and observation points)");
  c_scn->add_option("--out", sc.out)->required();

  DataArgs da;
  auto* c_data = app.add_subcommand("generate-data", "Evaluate G(v*) for a scenario, optionally with noise");
  c_data->add_option("--scenario", da.scenario)->required();
  c_data->add_option("--out", da.out)->required();
  c_data->add_flag("--add-noise", da.add_noise);
  c_data->add_option("--seed", da.seed, "noise seed");

  SampleArgs sa;
  auto* c_sample = app.add_subcommand("sample", "Run MCMC chains");
  c_sample->add_option("--scenario", sa.scenario)->required();
  c_sample->add_option("--data", sa.data, "data CSV (default: noiseless G(v*))");
  c_sample->add_flag("--no-data", sa.no_data, "drop all observations and sample the prior");
  add_kernel_flags(c_sample, sa.kernel, sa.params);
  c_sample->add_option("--steps", sa.steps);
  c_sample->add_option("--chains", sa.chains);
  c_sample->add_option("--seed", sa.seed, "base seed; chain c uses seed xor c");
  c_sample->add_option("--out", sa.out)->required();
  c_sample->add_flag("--resume", sa.resume);
  c_sample->add_option("--thin", sa.thin);
  c_sample->add_option("--checkpoint-every", sa.checkpoint_every);
  c_sample->add_option("--stop-after", sa.stop_after, "stop each chain after this many steps (resumable)");
  c_sample->add_option("--workers", sa.workers, "concurrent chains (default: available cores)");
  c_sample->add_option("--init-from", sa.init_from, "start every chain at the last row of this samples CSV");

  GradArgs ga;
  auto* c_grad = app.add_subcommand("gradient-check", "Compare the adjoint gradient with finite differences");
  c_grad->add_option("--scenario", ga.scenario, "scenario JSON (default: built-in random setup)");
  c_grad->add_option("--trials", ga.trials);
  c_grad->add_option("--h", ga.h, "finite-difference step");
  c_grad->add_option("--cutoff", ga.cutoff, "flow cutoff of the built-in setup");
  c_grad->add_option("--tolerance", ga.tolerance);
  c_grad->add_option("--seed", ga.seed);
  c_grad->add_option("--out", ga.out, "report CSV");
  c_grad->add_option("--corrupt-sign", ga.corrupt_sign, "flip the adjoint sign of one component");
  c_grad->add_flag("--zero-residual", ga.zero_residual, "use data equal to G(v)");

  DiagnoseArgs dg;
  auto* c_diag = app.add_subcommand("diagnose", "Write the diagnostics CSV suite for a set of chains");
  c_diag->add_option("--chains", dg.chains, "output directory of `sample`")->required();
  c_diag->add_option("--reference", dg.reference, "reference JSON (frozen histogram edges)");
  c_diag->add_option("--scenario", dg.scenario, "scenario JSON, enables observables.csv");
  c_diag->add_option("--out", dg.out)->required();
  c_diag->add_option("--components", dg.components);
  c_diag->add_option("--max-lag", dg.max_lag);
  c_diag->add_option("--tv-points", dg.tv_points);
  c_diag->add_option("--chain", dg.chain, "chain used for trace, acf and observables");

  ReferenceArgs ra;
  auto* c_ref = app.add_subcommand("reference", "Build the pooled reference posterior");
  c_ref->add_option("--scenario", ra.scenario)->required();
  c_ref->add_option("--data", ra.data);
  c_ref->add_option("--from-chains", ra.from_chains, "summarize existing chains instead of running");
  c_ref->add_option("--out", ra.out)->required();
  add_kernel_flags(c_ref, ra.kernel, ra.params);
  c_ref->add_option("--chains", ra.chains);
  c_ref->add_option("--steps", ra.steps);
  c_ref->add_option("--burn-in", ra.burn_in);
  c_ref->add_option("--thin", ra.thin);
  c_ref->add_option("--seed", ra.seed);
  c_ref->add_option("--workers", ra.workers);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (c_scn->parsed()) return cmd_scenario(sc, out);
    if (c_data->parsed()) return cmd_generate_data(da, out);
    if (c_sample->parsed()) return cmd_sample(sa, out);
    if (c_grad->parsed()) return cmd_gradient_check(ga, out);
    if (c_diag->parsed()) return cmd_diagnose(dg, out, err);
    if (c_ref->parsed()) return cmd_reference(ra, out);
  } catch (const SolverFailure& e) {
    err << "numerical failure: " << e.what() << " (residual " << e.residual() << ")\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace flowinfer
