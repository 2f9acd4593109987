#include "flowinfer/flow_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowinfer/errors.hpp"

namespace flowinfer {

double WaveVector::norm() const { return std::sqrt(static_cast<double>(norm_squared())); }

namespace {

bool canonical_less(WaveVector a, WaveVector b) {
  if (a.norm_squared() != b.norm_squared()) return a.norm_squared() < b.norm_squared();
  return std::pair(a.kx, a.ky) < std::pair(b.kx, b.ky);
}

bool within(WaveVector k, double cutoff) {
  // Integer norms compared against cutoff^2 with a relative guard so that
  // cutoff = 8 includes (8, 0) and (0, 8) regardless of rounding in 8.0 * 8.0.
  return static_cast<double>(k.norm_squared()) <= cutoff * cutoff * (1.0 + 1e-12);
}

}  // namespace

FlowIndexSet::FlowIndexSet(double cutoff) : cutoff_(cutoff) {
  if (!(cutoff >= 1.0) || !std::isfinite(cutoff)) {
    throw InvalidArgument("flow index set cutoff must be >= 1 (no flow modes below)");
  }
  const int extent = static_cast<int>(std::floor(cutoff * (1.0 + 1e-12)));
  for (int ky = 0; ky <= extent; ++ky) {
    for (int kx = -extent; kx <= extent; ++kx) {
      WaveVector k{kx, ky};
      if (k.is_representative() && within(k, cutoff)) reps_.push_back(k);
    }
  }
  std::sort(reps_.begin(), reps_.end(), canonical_less);
  for (std::size_t j = 0; j < reps_.size(); ++j) slots_.emplace(reps_[j], static_cast<int>(j));
}

int FlowIndexSet::max_norm_extent() const {
  int m = 0;
  for (auto k : reps_) m = std::max({m, std::abs(k.kx), std::abs(k.ky)});
  return m;
}

int FlowIndexSet::slot(WaveVector k) const {
  auto it = slots_.find(k);
  return it == slots_.end() ? -1 : it->second;
}

nlohmann::json FlowIndexSet::to_json() const {
  nlohmann::json modes = nlohmann::json::array();
  for (auto k : reps_) modes.push_back({k.kx, k.ky});
  return {{"cutoff", cutoff_}, {"modes", modes}};
}

FlowIndexSet FlowIndexSet::from_json(const nlohmann::json& j) {
  FlowIndexSet idx(j.at("cutoff").get<double>());
  if (j.contains("modes")) {
    std::vector<WaveVector> listed;
    for (const auto& m : j.at("modes")) listed.push_back({m.at(0).get<int>(), m.at(1).get<int>()});
    if (listed != idx.reps_) throw IndexMismatch("serialized mode order does not match canonical order");
  }
  return idx;
}

FlowIndexSet build_index_set(double cutoff) { return FlowIndexSet(cutoff); }

DivFreeVelocityField::DivFreeVelocityField(Eigen::Vector2d mean_flow,
                                           std::map<WaveVector, Complex> modes)
    : mean_(std::move(mean_flow)), modes_(std::move(modes)) {
  for (const auto& [k, v] : modes_) {
    if (!k.is_representative()) {
      throw InvalidArgument("velocity modes must be stored on the half-lattice representative");
    }
  }
}

Complex DivFreeVelocityField::mode(WaveVector k) const {
  if (k.is_zero()) return 0.0;
  if (k.is_representative()) {
    auto it = modes_.find(k);
    return it == modes_.end() ? Complex{} : it->second;
  }
  auto it = modes_.find(-k);
  return it == modes_.end() ? Complex{} : -std::conj(it->second);
}

Eigen::Vector2cd DivFreeVelocityField::coefficient(WaveVector k) const {
  if (k.is_zero()) return mean_.cast<Complex>();
  const Complex v = mode(k);
  const WaveVector p = k.perp();
  const double inv = 1.0 / k.norm();
  return Eigen::Vector2cd(v * (p.kx * inv), v * (p.ky * inv));
}

int DivFreeVelocityField::max_norm_extent() const {
  int m = 0;
  for (const auto& [k, v] : modes_) {
    if (v != Complex{}) m = std::max({m, std::abs(k.kx), std::abs(k.ky)});
  }
  return m;
}

double DivFreeVelocityField::max_euclidean_norm() const {
  double m = 0.0;
  for (const auto& [k, v] : modes_) {
    if (v != Complex{}) m = std::max(m, k.norm());
  }
  return m;
}

DivFreeVelocityField DivFreeVelocityField::scaled(double factor) const {
  auto modes = modes_;
  for (auto& [k, v] : modes) v *= factor;
  return DivFreeVelocityField(mean_ * factor, std::move(modes));
}

RealComponentVector to_components(const DivFreeVelocityField& field, const FlowIndexSet& idx) {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.component_count()));
  values[0] = field.mean_flow()[0];
  values[1] = field.mean_flow()[1];
  for (const auto& [k, v] : field.modes()) {
    const int j = idx.slot(k);
    if (j < 0) {
      if (v == Complex{}) continue;
      throw IndexMismatch("field has mode (" + std::to_string(k.kx) + "," + std::to_string(k.ky) +
                          ") outside the index set");
    }
    values[2 + 2 * j] = 2.0 * v.real();
    values[3 + 2 * j] = -2.0 * v.imag();
  }
  return {std::move(values)};
}

DivFreeVelocityField from_components(const Eigen::VectorXd& comps, const FlowIndexSet& idx) {
  if (static_cast<std::size_t>(comps.size()) != idx.component_count()) {
    throw IndexMismatch("component vector length " + std::to_string(comps.size()) +
                        " does not match index set (" + std::to_string(idx.component_count()) + ")");
  }
  std::map<WaveVector, Complex> modes;
  const auto& reps = idx.representatives();
  for (std::size_t j = 0; j < reps.size(); ++j) {
    const double a = comps[static_cast<Eigen::Index>(2 + 2 * j)];
    const double b = comps[static_cast<Eigen::Index>(3 + 2 * j)];
    modes.emplace(reps[j], Complex(0.5 * a, -0.5 * b));
  }
  return DivFreeVelocityField(Eigen::Vector2d(comps[0], comps[1]), std::move(modes));
}

DivFreeVelocityField from_components(const RealComponentVector& comps, const FlowIndexSet& idx) {
  return from_components(comps.values, idx);
}

Eigen::Vector2cd velocity_fourier_sum(const DivFreeVelocityField& field, const Eigen::Vector2d& x) {
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::Vector2cd sum = field.mean_flow().cast<Complex>();
  for (const auto& [k, v] : field.modes()) {
    for (WaveVector kk : {k, -k}) {
      const double phase = two_pi * (kk.kx * x[0] + kk.ky * x[1]);
      sum += field.coefficient(kk) * std::polar(1.0, phase);
    }
  }
  return sum;
}

Eigen::Vector2d evaluate_velocity(const DivFreeVelocityField& field, const Eigen::Vector2d& x) {
  const Eigen::Vector2d wrapped(x[0] - std::floor(x[0]), x[1] - std::floor(x[1]));
  return velocity_fourier_sum(field, wrapped).real();
}

double sobolev_norm(const DivFreeVelocityField& field, double s) {
  double sum = 0.0;
  for (const auto& [k, v] : field.modes()) {
    // |c_k|^2 = |v_k|^2, counted for both k and -k.
    sum += 2.0 * std::pow(k.norm(), 2.0 * s) * std::norm(v);
  }
  return std::sqrt(sum);
}

double shell_energy(const DivFreeVelocityField& field, int shell) {
  if (shell <= 0) return 0.0;
  const int target = shell * shell;
  double sum = 0.0;
  for (const auto& [k, v] : field.modes()) {
    if (k.norm_squared() == target) sum += 2.0 * std::norm(v);
  }
  return 0.5 * sum;
}

}  // namespace flowinfer
