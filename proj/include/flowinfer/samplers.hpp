#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowinfer/inference.hpp"
#include "json.hpp"

namespace flowinfer {

enum class KernelKind { pcn, is, mala, hmc };

std::string to_string(KernelKind kind);
KernelKind parse_kernel(const std::string& name);

struct KernelParams {
  KernelKind kind = KernelKind::pcn;
  double beta = 0.15;
  double h = 0.005;
  double epsilon = 0.125;
  double tau = 1.0;

  /// L = round(tau / epsilon).
  int leapfrog_steps() const;
  void validate() const;

  nlohmann::json to_json() const;
  static KernelParams from_json(const nlohmann::json& j);
};

struct ChainState {
  Eigen::VectorXd q;
  double phi = 0.0;
  std::optional<Eigen::VectorXd> grad;
};

/// Evaluates Phi (and DPhi when requested) at q.
ChainState make_state(Eigen::VectorXd q, bool with_gradient, PosteriorModel& model);

/// Each step returns whether the proposal was accepted; on rejection the
/// state is untouched. Proposals with non-finite Phi, or whose solve fails,
/// are rejected.
bool pcn_step(ChainState& state, double beta, const GaussianPrior& prior, Rng& rng, PosteriorModel& model);
bool is_step(ChainState& state, const GaussianPrior& prior, Rng& rng, PosteriorModel& model);
/// Requires state.grad.
bool mala_step(ChainState& state, double h, const GaussianPrior& prior, Rng& rng, PosteriorModel& model);
/// Rotation-kick-rotation leapfrog for H = Phi + |q|_C^2 / 2 + |w|_C^2 / 2.
bool hmc_step(ChainState& state, double epsilon, double tau, const GaussianPrior& prior, Rng& rng,
              PosteriorModel& model);

bool kernel_step(ChainState& state, const KernelParams& params, const GaussianPrior& prior, Rng& rng,
                 PosteriorModel& model);

/// MALA log-proposal correction rho(v, w) for a known Phi(v) and DPhi(v).
double mala_rho(const Eigen::VectorXd& v, const Eigen::VectorXd& w, double phi_v, const Eigen::VectorXd& grad_v,
                double h, const GaussianPrior& prior);

struct ChainRecord {
  std::vector<Eigen::VectorXd> samples;  // every `thin`-th state
  std::vector<double> phis;              // every step
  std::vector<std::uint8_t> accepts;     // every step
  std::uint64_t seed = 0;
  KernelParams params;
  int thin = 1;
  int steps_done = 0;
  SolveCounters counters;       // solves spent by the kernel steps
  SolveCounters init_counters;  // solves spent on the initial state
  double wall_seconds = 0.0;

  double acceptance_rate() const;
};

struct ChainCheckpoint {
  ChainRecord record;
  ChainState state;
  Rng rng;
};

struct ChainOptions {
  int n_steps = 1;
  std::uint64_t seed = 0;
  int thin = 1;
  int checkpoint_every = 1000;
  /// Stop early (after a checkpoint) once this many steps are done; < 0 disables.
  int stop_after = -1;
  std::function<void(const ChainCheckpoint&)> on_checkpoint;
  std::function<void(int step, const ChainState&, bool accepted)> on_step;
};

/// Runs a chain from `initial` (or a prior draw when absent). Deterministic
/// given (initial, params, seed, model).
ChainRecord run_chain(const std::optional<Eigen::VectorXd>& initial, const KernelParams& params,
                      const ChainOptions& options, const GaussianPrior& prior, PosteriorModel& model);

/// Continues a checkpointed chain until options.n_steps steps are done.
ChainRecord resume_chain(ChainCheckpoint checkpoint, const ChainOptions& options, const GaussianPrior& prior,
                         PosteriorModel& model);

}  // namespace flowinfer
