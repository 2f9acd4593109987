#include "flowinfer/samplers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "flowinfer/errors.hpp"

namespace flowinfer {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::pcn: return "pcn";
    case KernelKind::is: return "is";
    case KernelKind::mala: return "mala";
    case KernelKind::hmc: return "hmc";
  }
  return "pcn";
}

KernelKind parse_kernel(const std::string& name) {
  if (name == "pcn") return KernelKind::pcn;
  if (name == "is") return KernelKind::is;
  if (name == "mala") return KernelKind::mala;
  if (name == "hmc") return KernelKind::hmc;
  throw InvalidArgument("unknown kernel '" + name + "'");
}

int KernelParams::leapfrog_steps() const { return static_cast<int>(std::lround(tau / epsilon)); }

void KernelParams::validate() const {
  switch (kind) {
    case KernelKind::pcn:
      if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in (0, 1]");
      break;
    case KernelKind::is: break;
    case KernelKind::mala:
      if (!(h > 0.0)) throw InvalidArgument("h must be positive");
      break;
    case KernelKind::hmc:
      if (!(epsilon > 0.0) || !(tau >= epsilon)) throw InvalidArgument("HMC needs tau >= epsilon > 0");
      if (leapfrog_steps() < 1) throw InvalidArgument("HMC needs at least one leapfrog step");
      break;
  }
}

nlohmann::json KernelParams::to_json() const {
  nlohmann::json j{{"kernel", to_string(kind)}};
  switch (kind) {
    case KernelKind::pcn: j["beta"] = beta; break;
    case KernelKind::is: break;
    case KernelKind::mala: j["h"] = h; break;
    case KernelKind::hmc:
      j["epsilon"] = epsilon;
      j["tau"] = tau;
      j["leapfrog_steps"] = leapfrog_steps();
      break;
  }
  return j;
}

KernelParams KernelParams::from_json(const nlohmann::json& j) {
  KernelParams p;
  p.kind = parse_kernel(j.at("kernel").get<std::string>());
  p.beta = j.value("beta", p.beta);
  p.h = j.value("h", p.h);
  p.epsilon = j.value("epsilon", p.epsilon);
  p.tau = j.value("tau", p.tau);
  return p;
}

ChainState make_state(Eigen::VectorXd q, bool with_gradient, PosteriorModel& model) {
  ChainState s;
  if (with_gradient) {
    Eigen::VectorXd g;
    s.phi = model.potential_and_gradient(q, g);
    s.grad = std::move(g);
  } else {
    s.phi = model.potential(q);
  }
  s.q = std::move(q);
  return s;
}

namespace {

bool metropolis(double log_alpha, Rng& rng) {
  const double u = rng.uniform();
  return std::isfinite(log_alpha) && std::log(u) < log_alpha;
}

bool accept_phi_difference(ChainState& state, Eigen::VectorXd proposal, Rng& rng, PosteriorModel& model) {
  double phi = std::numeric_limits<double>::infinity();
  try {
    phi = model.potential(proposal);
  } catch (const SolverFailure&) {
  }
  if (!std::isfinite(phi)) model.note_failure();
  if (!metropolis(state.phi - phi, rng)) return false;
  state.q = std::move(proposal);
  state.phi = phi;
  return true;
}

}  // namespace

bool pcn_step(ChainState& state, double beta, const GaussianPrior& prior, Rng& rng, PosteriorModel& model) {
  const Eigen::VectorXd xi = prior.sample(rng);
  Eigen::VectorXd proposal = std::sqrt(1.0 - beta * beta) * state.q + beta * xi;
  return accept_phi_difference(state, std::move(proposal), rng, model);
}

bool is_step(ChainState& state, const GaussianPrior& prior, Rng& rng, PosteriorModel& model) {
  return accept_phi_difference(state, prior.sample(rng), rng, model);
}

double mala_rho(const Eigen::VectorXd& v, const Eigen::VectorXd& w, double phi_v, const Eigen::VectorXd& grad_v,
                double h, const GaussianPrior& prior) {
  const double cg = grad_v.dot(prior.variance().cwiseProduct(grad_v));
  return phi_v + 0.5 * (w - v).dot(grad_v) + 0.25 * h * (v + w).dot(grad_v) + 0.25 * h * cg;
}

bool mala_step(ChainState& state, double h, const GaussianPrior& prior, Rng& rng, PosteriorModel& model) {
  if (!state.grad) throw InvalidArgument("MALA state needs a cached gradient");
  const Eigen::VectorXd& v = state.q;
  const Eigen::VectorXd& g = *state.grad;
  const Eigen::VectorXd xi = prior.sample(rng);
  Eigen::VectorXd proposal = ((2.0 - h) / (2.0 + h)) * v -
                             (2.0 * h / (2.0 + h)) * prior.variance().cwiseProduct(g) +
                             (std::sqrt(8.0 * h) / (2.0 + h)) * xi;
  double phi = std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  try {
    phi = model.potential_and_gradient(proposal, grad);
  } catch (const SolverFailure&) {
  }
  double log_alpha = -std::numeric_limits<double>::infinity();
  if (std::isfinite(phi) && grad.allFinite()) {
    log_alpha = mala_rho(v, proposal, state.phi, g, h, prior) - mala_rho(proposal, v, phi, grad, h, prior);
  }
  if (!std::isfinite(log_alpha)) model.note_failure();
  if (!metropolis(log_alpha, rng)) return false;
  state.q = std::move(proposal);
  state.phi = phi;
  state.grad = std::move(grad);
  return true;
}

bool hmc_step(ChainState& state, double epsilon, double tau, const GaussianPrior& prior, Rng& rng,
              PosteriorModel& model) {
  const int steps = static_cast<int>(std::lround(tau / epsilon));
  if (steps < 1) throw InvalidArgument("HMC needs at least one leapfrog step");
  const Eigen::VectorXd var = prior.variance();
  Eigen::VectorXd q = state.q;
  Eigen::VectorXd w = prior.sample(rng);
  const double h0 = state.phi + 0.5 * prior.cameron_martin_norm2(q) + 0.5 * prior.cameron_martin_norm2(w);

  const double c = std::cos(0.5 * epsilon);
  const double s = std::sin(0.5 * epsilon);
  auto rotate = [&] {
    const Eigen::VectorXd q_next = c * q + s * w;
    w = c * w - s * q;
    q = q_next;
  };

  double phi = std::numeric_limits<double>::infinity();
  try {
    Eigen::VectorXd grad;
    for (int i = 0; i < steps; ++i) {
      rotate();
      model.potential_and_gradient(q, grad);
      w -= epsilon * var.cwiseProduct(grad);
      rotate();
    }
    phi = model.potential(q);
  } catch (const SolverFailure&) {
  }
  const double h1 = phi + 0.5 * prior.cameron_martin_norm2(q) + 0.5 * prior.cameron_martin_norm2(w);
  if (!std::isfinite(h1)) model.note_failure();
  if (!metropolis(h0 - h1, rng)) return false;
  state.q = std::move(q);
  state.phi = phi;
  state.grad.reset();
  return true;
}

bool kernel_step(ChainState& state, const KernelParams& params, const GaussianPrior& prior, Rng& rng,
                 PosteriorModel& model) {
  switch (params.kind) {
    case KernelKind::pcn: return pcn_step(state, params.beta, prior, rng, model);
    case KernelKind::is: return is_step(state, prior, rng, model);
    case KernelKind::mala: return mala_step(state, params.h, prior, rng, model);
    case KernelKind::hmc: return hmc_step(state, params.epsilon, params.tau, prior, rng, model);
  }
  return false;
}

double ChainRecord::acceptance_rate() const {
  if (accepts.empty()) return 0.0;
  return static_cast<double>(std::accumulate(accepts.begin(), accepts.end(), 0LL)) /
         static_cast<double>(accepts.size());
}

namespace {

ChainRecord advance_chain(ChainCheckpoint cp, const ChainOptions& options, const GaussianPrior& prior,
                          PosteriorModel& model) {
  const auto start = std::chrono::steady_clock::now();
  const double wall_before = cp.record.wall_seconds;
  auto& rec = cp.record;
  model.set_counters(rec.counters);
  const int target = options.stop_after >= 0 ? std::min(options.n_steps, options.stop_after) : options.n_steps;
  auto emit_checkpoint = [&] {
    rec.wall_seconds = wall_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (options.on_checkpoint) options.on_checkpoint(cp);
  };
  while (rec.steps_done < target) {
    const bool accepted = kernel_step(cp.state, rec.params, prior, cp.rng, model);
    rec.steps_done += 1;
    rec.counters = model.counters();
    rec.phis.push_back(cp.state.phi);
    rec.accepts.push_back(accepted ? 1 : 0);
    if (rec.steps_done % rec.thin == 0) rec.samples.push_back(cp.state.q);
    if (options.on_step) options.on_step(rec.steps_done, cp.state, accepted);
    if (options.checkpoint_every > 0 && rec.steps_done % options.checkpoint_every == 0) emit_checkpoint();
  }
  emit_checkpoint();
  return rec;
}

}  // namespace

ChainRecord run_chain(const std::optional<Eigen::VectorXd>& initial, const KernelParams& params,
                      const ChainOptions& options, const GaussianPrior& prior, PosteriorModel& model) {
  params.validate();
  if (options.n_steps < 1) throw InvalidArgument("n_steps must be at least 1");
  if (options.thin < 1) throw InvalidArgument("thin must be at least 1");
  ChainCheckpoint cp{{}, {}, Rng(options.seed)};
  cp.record.seed = options.seed;
  cp.record.params = params;
  cp.record.thin = options.thin;
  Eigen::VectorXd q0 = initial ? *initial : prior.sample(cp.rng);
  if (q0.size() != prior.size()) throw IndexMismatch("initial state length does not match prior");
  model.set_counters({});
  cp.state = make_state(std::move(q0), params.kind == KernelKind::mala, model);
  cp.record.init_counters = model.counters();
  return advance_chain(std::move(cp), options, prior, model);
}

ChainRecord resume_chain(ChainCheckpoint checkpoint, const ChainOptions& options, const GaussianPrior& prior,
                         PosteriorModel& model) {
  checkpoint.record.params.validate();
  return advance_chain(std::move(checkpoint), options, prior, model);
}

}  // namespace flowinfer
