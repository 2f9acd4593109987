#pragma once

#include <Eigen/Dense>
#include <compare>
#include <complex>
#include <cstddef>
#include <map>
#include <vector>

#include "json.hpp"

namespace flowinfer {

using Complex = std::complex<double>;

/// Integer wave vector on the lattice Z^2.
struct WaveVector {
  int kx = 0;
  int ky = 0;

  int norm_squared() const { return kx * kx + ky * ky; }
  double norm() const;
  /// [-ky, kx], orthogonal to the wave vector.
  WaveVector perp() const { return {-ky, kx}; }
  WaveVector operator-() const { return {-kx, -ky}; }
  WaveVector operator+(WaveVector o) const { return {kx + o.kx, ky + o.ky}; }
  WaveVector operator-(WaveVector o) const { return {kx - o.kx, ky - o.ky}; }
  bool is_zero() const { return kx == 0 && ky == 0; }
  /// Half-lattice convention {ky > 0} U {ky == 0, kx > 0}.
  bool is_representative() const { return ky > 0 || (ky == 0 && kx > 0); }

  friend auto operator<=>(const WaveVector&, const WaveVector&) = default;
};

inline int dot(WaveVector a, WaveVector b) { return a.kx * b.kx + a.ky * b.ky; }

/// Canonically ordered flow modes with Euclidean norm at most `cutoff`.
///
/// Only one of {k, -k} is stored. Order is by |k| ascending, then (kx, ky)
/// lexicographic, so the same cutoff always yields the same component layout:
/// index 0/1 are the mean flow, and representative j owns indices 2+2j (cosine
/// amplitude) and 3+2j (sine amplitude).
class FlowIndexSet {
 public:
  explicit FlowIndexSet(double cutoff);

  double cutoff() const { return cutoff_; }
  const std::vector<WaveVector>& representatives() const { return reps_; }
  std::size_t mode_count() const { return reps_.size(); }
  std::size_t component_count() const { return 2 + 2 * reps_.size(); }
  /// Largest |kx| or |ky| among the representatives.
  int max_norm_extent() const;

  /// Slot of a representative, or -1 when absent.
  int slot(WaveVector k) const;
  bool contains(WaveVector k) const { return slot(k) >= 0; }

  nlohmann::json to_json() const;
  static FlowIndexSet from_json(const nlohmann::json& j);

  friend bool operator==(const FlowIndexSet& a, const FlowIndexSet& b) {
    return a.cutoff_ == b.cutoff_ && a.reps_ == b.reps_;
  }

 private:
  double cutoff_;
  std::vector<WaveVector> reps_;
  std::map<WaveVector, int> slots_;
};

FlowIndexSet build_index_set(double cutoff);

/// Flat real coordinates of a velocity field in canonical order.
struct RealComponentVector {
  Eigen::VectorXd values;
};

/// Incompressible, time-stationary periodic flow on [0,1]^2.
///
/// The physical field is mean_flow + sum_k v_k (k_perp/|k|) exp(2 pi i k.x)
/// over all nonzero k, with conj(v_k) = -v_{-k}. Only representative modes are
/// stored, so the reality condition holds by construction.
class DivFreeVelocityField {
 public:
  DivFreeVelocityField() = default;
  DivFreeVelocityField(Eigen::Vector2d mean_flow, std::map<WaveVector, Complex> modes);

  const Eigen::Vector2d& mean_flow() const { return mean_; }
  const std::map<WaveVector, Complex>& modes() const { return modes_; }

  /// v_k for any nonzero k (applies the reality condition for -k).
  Complex mode(WaveVector k) const;
  /// Physical Fourier coefficient c_k; c_0 is the mean flow.
  Eigen::Vector2cd coefficient(WaveVector k) const;

  int max_norm_extent() const;
  double max_euclidean_norm() const;

  DivFreeVelocityField operator-() const { return scaled(-1.0); }
  DivFreeVelocityField scaled(double factor) const;

 private:
  Eigen::Vector2d mean_ = Eigen::Vector2d::Zero();
  std::map<WaveVector, Complex> modes_;
};

RealComponentVector to_components(const DivFreeVelocityField& field, const FlowIndexSet& idx);
DivFreeVelocityField from_components(const RealComponentVector& comps, const FlowIndexSet& idx);
DivFreeVelocityField from_components(const Eigen::VectorXd& comps, const FlowIndexSet& idx);

/// Two-sided complex Fourier sum of the velocity at x, before taking the real part.
Eigen::Vector2cd velocity_fourier_sum(const DivFreeVelocityField& field, const Eigen::Vector2d& x);
Eigen::Vector2d evaluate_velocity(const DivFreeVelocityField& field, const Eigen::Vector2d& x);

/// sqrt(sum_{k != 0} |k|^{2s} |c_k|^2) over the full two-sided lattice.
double sobolev_norm(const DivFreeVelocityField& field, double s);

/// (1/2) sum over lattice points with |k| == shell of |c_k|^2, both signs included.
double shell_energy(const DivFreeVelocityField& field, int shell);

}  // namespace flowinfer
