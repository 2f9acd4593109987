#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "flowinfer/diagnostics.hpp"
#include "flowinfer/inference.hpp"
#include "flowinfer/samplers.hpp"
#include "json.hpp"

namespace flowinfer {

/// Pooled multi-chain run used as the comparison baseline.
struct ReferenceBudget {
  KernelParams kernel;
  int chains = 1;
  int steps = 1;
  int burn_in = 0;
  int thin = 1;  // keep every thin-th step after burn-in
};

/// Fully specified inverse problem: physics, prior, truth, observations and solver.
struct Scenario {
  std::string name;
  std::string level = "paper";
  std::uint64_t seed = 0;
  double kappa = 0.282;
  double sigma_eta = 1.0 / 64.0;
  ScalarSpectralField theta0{1};
  KraichnanParams prior;
  double true_cutoff = 1.0;
  Eigen::VectorXd true_components;
  std::string true_formula;  // empty when the truth was drawn from the prior
  ObservationSpec observations;
  double sampling_cutoff = 8.0;
  SolverConfig solver;
  ReferenceBudget reference;

  FlowIndexSet index_set() const { return FlowIndexSet(sampling_cutoff); }
  KraichnanPrior make_prior() const { return KraichnanPrior(index_set(), prior); }
  DivFreeVelocityField truth() const;
  ForwardProblem forward_problem() const;
  /// Noiseless data G(v*).
  Eigen::VectorXd noiseless_data() const;

  nlohmann::json to_json() const;
  static Scenario from_json(const nlohmann::json& j);
};

/// theta0 = 1/2 - cos(2 pi x)/4 - cos(2 pi y)/4.
ScalarSpectralField example_theta0();

/// E0 default: the |k| = 1 prior components have unit standard deviation.
KraichnanParams default_prior_params();

Scenario example1(std::uint64_t seed);
Scenario example2();

/// Reduced variant; level is "small", "medium" or "paper" (unchanged).
Scenario desk_scale(const Scenario& scenario, const std::string& level);

/// example1/example2 by name, reduced to `level`.
Scenario make_scenario(const std::string& name, const std::string& level, std::uint64_t seed);

/// PdeModel for sampling the scenario against data y.
PdeModel make_model(const Scenario& scenario, const Eigen::VectorXd& y);

/// Frozen baseline: per-component histograms (fixed edges) and pooled moments.
struct ReferenceArtifacts {
  std::vector<Histogram1D> histograms;  // one per component
  MomentSummary moments;
  std::size_t samples = 0;
  int chains = 0;
  /// Pooled means of the flow observables (enstrophy, enstrophy_dissipation).
  std::map<std::string, double> observable_means;

  nlohmann::json to_json() const;
  static ReferenceArtifacts from_json(const nlohmann::json& j);
};

/// 64 bins per component over mean +/- 4 sd (a degenerate component gets +/- 1).
std::vector<Histogram1D> reference_edges(const MomentSummary& moments, int bins = 64);

ReferenceArtifacts summarize_reference(const std::vector<Eigen::VectorXd>& pooled, int chains,
                                       const FlowIndexSet& idx);

/// Flow-only observables of a component vector, in a fixed order.
std::vector<std::pair<std::string, double>> flow_observables(const Eigen::VectorXd& q, const FlowIndexSet& idx);

/// Pooled multi-chain run with prior-drawn initial states; chain c uses seed
/// `seed_base ^ c` and drops its first `budget.burn_in` steps (a multiple of thin). `workers` > 1
/// runs chains concurrently; the result does not depend on it.
ReferenceArtifacts build_reference(const Scenario& scenario, const Eigen::VectorXd& y, const ReferenceBudget& budget,
                                   std::uint64_t seed_base, int workers = 1);

}  // namespace flowinfer
