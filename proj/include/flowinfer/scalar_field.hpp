#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "flowinfer/flow_field.hpp"

namespace flowinfer {

/// Dense square set of scalar modes {|kx|, |ky| <= cutoff}, including k = 0.
///
/// Two coordinate systems are used. The complex layout stores theta_k at
/// (kx + cutoff) * side + (ky + cutoff). The real layout stores theta_0 at 0
/// and, for the j-th half-lattice representative in complex-layout order,
/// Re(theta_k) at 1 + 2j and Im(theta_k) at 2 + 2j. Both have `size()` entries.
class ScalarBasis {
 public:
  explicit ScalarBasis(int cutoff);

  int cutoff() const { return cutoff_; }
  int side() const { return side_; }
  std::size_t size() const { return static_cast<std::size_t>(side_) * side_; }

  bool contains(WaveVector k) const {
    return k.kx >= -cutoff_ && k.kx <= cutoff_ && k.ky >= -cutoff_ && k.ky <= cutoff_;
  }
  int complex_index(WaveVector k) const { return (k.kx + cutoff_) * side_ + (k.ky + cutoff_); }
  WaveVector wave(int complex_index) const {
    return {complex_index / side_ - cutoff_, complex_index % side_ - cutoff_};
  }

  /// Representatives in real-layout order (pair j <-> representatives()[j]).
  const std::vector<WaveVector>& representatives() const { return reps_; }
  /// Pair index of k or -k, whichever is the representative; -1 for k = 0.
  int pair_index(WaveVector k) const;

  Eigen::VectorXd to_real(const Eigen::VectorXcd& coeffs) const;
  Eigen::VectorXcd to_complex(const Eigen::VectorXd& real) const;

 private:
  int cutoff_;
  int side_;
  std::vector<WaveVector> reps_;
  std::vector<int> pair_of_complex_;
};

/// Periodic real scalar field held by its truncated Fourier coefficients.
class ScalarSpectralField {
 public:
  explicit ScalarSpectralField(int cutoff);
  ScalarSpectralField(int cutoff, Eigen::VectorXcd coeffs);

  int cutoff() const { return cutoff_; }
  const Eigen::VectorXcd& coeffs() const { return coeffs_; }
  Eigen::VectorXcd& coeffs() { return coeffs_; }

  bool contains(WaveVector k) const {
    return std::abs(k.kx) <= cutoff_ && std::abs(k.ky) <= cutoff_;
  }
  Complex at(WaveVector k) const;
  void set(WaveVector k, Complex value);
  /// Sets theta_k and theta_{-k} = conj(value).
  void set_real_pair(WaveVector k, Complex value);

  /// Physical value sum_k theta_k exp(2 pi i k.x), real part.
  double evaluate(const Eigen::Vector2d& x) const;
  /// max_k |theta_k - conj(theta_{-k})|.
  double reality_defect() const;
  /// Largest max(|kx|, |ky|) among nonzero coefficients.
  int max_frequency() const;

  /// Copy onto another cutoff (zero-padded or truncated).
  ScalarSpectralField resized(int cutoff) const;

 private:
  int cutoff_;
  Eigen::VectorXcd coeffs_;
};

/// sqrt(sum_{k != 0} |k|^{2s} |theta_k|^2).
double sobolev_norm(const ScalarSpectralField& field, double s);

/// Spectral curl: omega_k = 2 pi i (kx c_k,y - ky c_k,x), on max-norm cutoff
/// equal to the index set's extent.
ScalarSpectralField vorticity(const DivFreeVelocityField& field, const FlowIndexSet& idx);

/// Values on a uniform n x n grid, row i <-> x = i/n, column j <-> y = j/n.
Eigen::MatrixXd sample_on_grid(const ScalarSpectralField& field, int n);

}  // namespace flowinfer
