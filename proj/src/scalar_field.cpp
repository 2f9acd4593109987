#include "flowinfer/scalar_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowinfer/errors.hpp"

namespace flowinfer {

ScalarBasis::ScalarBasis(int cutoff) : cutoff_(cutoff), side_(2 * cutoff + 1) {
  if (cutoff < 0) throw InvalidArgument("scalar cutoff must be nonnegative");
  pair_of_complex_.assign(size(), -1);
  for (int i = 0; i < static_cast<int>(size()); ++i) {
    const WaveVector k = wave(i);
    if (k.is_representative()) {
      pair_of_complex_[static_cast<std::size_t>(i)] = static_cast<int>(reps_.size());
      reps_.push_back(k);
    }
  }
  for (int i = 0; i < static_cast<int>(size()); ++i) {
    const WaveVector k = wave(i);
    if (!k.is_zero() && !k.is_representative()) {
      pair_of_complex_[static_cast<std::size_t>(i)] =
          pair_of_complex_[static_cast<std::size_t>(complex_index(-k))];
    }
  }
}

int ScalarBasis::pair_index(WaveVector k) const {
  return pair_of_complex_[static_cast<std::size_t>(complex_index(k))];
}

Eigen::VectorXd ScalarBasis::to_real(const Eigen::VectorXcd& coeffs) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(size()));
  r[0] = coeffs[complex_index({0, 0})].real();
  for (std::size_t j = 0; j < reps_.size(); ++j) {
    const Complex c = coeffs[complex_index(reps_[j])];
    r[static_cast<Eigen::Index>(1 + 2 * j)] = c.real();
    r[static_cast<Eigen::Index>(2 + 2 * j)] = c.imag();
  }
  return r;
}

Eigen::VectorXcd ScalarBasis::to_complex(const Eigen::VectorXd& real) const {
  Eigen::VectorXcd c(static_cast<Eigen::Index>(size()));
  c[complex_index({0, 0})] = real[0];
  for (std::size_t j = 0; j < reps_.size(); ++j) {
    const Complex v(real[static_cast<Eigen::Index>(1 + 2 * j)], real[static_cast<Eigen::Index>(2 + 2 * j)]);
    c[complex_index(reps_[j])] = v;
    c[complex_index(-reps_[j])] = std::conj(v);
  }
  return c;
}

ScalarSpectralField::ScalarSpectralField(int cutoff)
    : cutoff_(cutoff),
      coeffs_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>((2 * cutoff + 1) * (2 * cutoff + 1)))) {
  if (cutoff < 0) throw InvalidArgument("scalar cutoff must be nonnegative");
}

ScalarSpectralField::ScalarSpectralField(int cutoff, Eigen::VectorXcd coeffs)
    : cutoff_(cutoff), coeffs_(std::move(coeffs)) {
  if (cutoff < 0) throw InvalidArgument("scalar cutoff must be nonnegative");
  if (coeffs_.size() != (2 * cutoff + 1) * (2 * cutoff + 1)) {
    throw IndexMismatch("coefficient array does not match scalar cutoff");
  }
}

Complex ScalarSpectralField::at(WaveVector k) const {
  if (!contains(k)) return 0.0;
  return coeffs_[(k.kx + cutoff_) * (2 * cutoff_ + 1) + (k.ky + cutoff_)];
}

void ScalarSpectralField::set(WaveVector k, Complex value) {
  if (!contains(k)) throw IndexMismatch("scalar mode outside cutoff");
  coeffs_[(k.kx + cutoff_) * (2 * cutoff_ + 1) + (k.ky + cutoff_)] = value;
}

void ScalarSpectralField::set_real_pair(WaveVector k, Complex value) {
  if (k.is_zero()) {
    set(k, value.real());
    return;
  }
  set(k, value);
  set(-k, std::conj(value));
}

double ScalarSpectralField::evaluate(const Eigen::Vector2d& x) const {
  const double two_pi = 2.0 * std::numbers::pi;
  // Separable phases: exp(2 pi i (kx x + ky y)) = ex[kx] * ey[ky].
  const int side = 2 * cutoff_ + 1;
  std::vector<Complex> ex(static_cast<std::size_t>(side)), ey(static_cast<std::size_t>(side));
  for (int k = -cutoff_; k <= cutoff_; ++k) {
    ex[static_cast<std::size_t>(k + cutoff_)] = std::polar(1.0, two_pi * k * x[0]);
    ey[static_cast<std::size_t>(k + cutoff_)] = std::polar(1.0, two_pi * k * x[1]);
  }
  Complex sum{};
  for (int a = 0; a < side; ++a) {
    Complex row{};
    for (int b = 0; b < side; ++b) row += coeffs_[a * side + b] * ey[static_cast<std::size_t>(b)];
    sum += row * ex[static_cast<std::size_t>(a)];
  }
  return sum.real();
}

double ScalarSpectralField::reality_defect() const {
  double worst = 0.0;
  for (int kx = -cutoff_; kx <= cutoff_; ++kx) {
    for (int ky = -cutoff_; ky <= cutoff_; ++ky) {
      worst = std::max(worst, std::abs(at({kx, ky}) - std::conj(at({-kx, -ky}))));
    }
  }
  return worst;
}

int ScalarSpectralField::max_frequency() const {
  int m = 0;
  for (int kx = -cutoff_; kx <= cutoff_; ++kx) {
    for (int ky = -cutoff_; ky <= cutoff_; ++ky) {
      if (at({kx, ky}) != Complex{}) m = std::max({m, std::abs(kx), std::abs(ky)});
    }
  }
  return m;
}

ScalarSpectralField ScalarSpectralField::resized(int cutoff) const {
  ScalarSpectralField out(cutoff);
  const int m = std::min(cutoff, cutoff_);
  for (int kx = -m; kx <= m; ++kx) {
    for (int ky = -m; ky <= m; ++ky) out.set({kx, ky}, at({kx, ky}));
  }
  return out;
}

double sobolev_norm(const ScalarSpectralField& field, double s) {
  double sum = 0.0;
  const int m = field.cutoff();
  for (int kx = -m; kx <= m; ++kx) {
    for (int ky = -m; ky <= m; ++ky) {
      const WaveVector k{kx, ky};
      if (k.is_zero()) continue;
      sum += std::pow(k.norm(), 2.0 * s) * std::norm(field.at(k));
    }
  }
  return std::sqrt(sum);
}

ScalarSpectralField vorticity(const DivFreeVelocityField& field, const FlowIndexSet& idx) {
  const int cutoff = std::max(idx.max_norm_extent(), field.max_norm_extent());
  ScalarSpectralField omega(cutoff);
  const Complex two_pi_i(0.0, 2.0 * std::numbers::pi);
  for (const auto& [k, v] : field.modes()) {
    for (WaveVector kk : {k, -k}) {
      const Eigen::Vector2cd c = field.coefficient(kk);
      omega.set(kk, two_pi_i * (static_cast<double>(kk.kx) * c[1] - static_cast<double>(kk.ky) * c[0]));
    }
  }
  return omega;
}

Eigen::MatrixXd sample_on_grid(const ScalarSpectralField& field, int n) {
  const int m = field.cutoff();
  const int side = 2 * m + 1;
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::MatrixXcd phases(n, side);
  for (int i = 0; i < n; ++i) {
    for (int k = -m; k <= m; ++k) phases(i, k + m) = std::polar(1.0, two_pi * k * i / n);
  }
  // coeffs are stored row-major over (kx, ky); Map as column-major gives C^T.
  const Eigen::Map<const Eigen::MatrixXcd> ct(field.coeffs().data(), side, side);
  return (phases * ct.transpose() * phases.transpose()).real();
}

}  // namespace flowinfer
