#include "flowinfer/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flowinfer/errors.hpp"

namespace flowinfer {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::vector<double> autocorrelation(const std::vector<double>& series, int max_lag) {
  const auto n = static_cast<int>(series.size());
  if (max_lag < 0 || n <= max_lag) throw InvalidArgument("series must be longer than max_lag");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double c0 = 0.0;
  for (double x : series) c0 += (x - mean) * (x - mean);
  if (c0 == 0.0) throw InvalidArgument("autocorrelation undefined for a constant series");
  std::vector<double> acf(static_cast<std::size_t>(max_lag) + 1);
  for (int lag = 0; lag <= max_lag; ++lag) {
    double c = 0.0;
    for (int i = 0; i + lag < n; ++i) c += (series[i] - mean) * (series[i + lag] - mean);
    acf[static_cast<std::size_t>(lag)] = c / c0;
  }
  acf[0] = 1.0;
  return acf;
}

double batch_means_stderr(const std::vector<double>& series) {
  const auto n = series.size();
  if (n < 4) throw InvalidArgument("need at least four values for batch means");
  const auto batch = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 2.0 / 3.0)));
  const std::size_t batches = n / batch;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < batch; ++i) means[b] += series[b * batch + i];
    means[b] /= static_cast<double>(batch);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

Histogram1D::Histogram1D(double lo, double hi, int bins) : lo_(lo), hi_(hi) {
  if (bins < 1) throw InvalidArgument("histogram needs at least one bin");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw InvalidArgument("histogram range is empty");
  counts_.assign(static_cast<std::size_t>(bins), 0);
}

int Histogram1D::bin_index(double x) const {
  const double pos = (x - lo_) / (hi_ - lo_) * bins();
  if (!(pos >= 0.0)) return 0;
  return std::min(bins() - 1, static_cast<int>(pos));
}

void Histogram1D::add(double x) {
  ++counts_[static_cast<std::size_t>(bin_index(x))];
  ++total_;
}

bool Histogram1D::same_edges(const Histogram1D& o) const {
  return lo_ == o.lo_ && hi_ == o.hi_ && counts_.size() == o.counts_.size();
}

void Histogram1D::merge(const Histogram1D& o) {
  if (!same_edges(o)) throw InvalidArgument("cannot merge histograms with different edges");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
  total_ += o.total_;
}

std::vector<double> Histogram1D::density() const {
  std::vector<double> d(counts_.size(), 0.0);
  if (total_ == 0) return d;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  return d;
}

nlohmann::json Histogram1D::to_json() const {
  return {{"lo", lo_}, {"hi", hi_}, {"bins", bins()}, {"counts", counts_}};
}

Histogram1D Histogram1D::from_json(const nlohmann::json& j) {
  Histogram1D h(j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("bins").get<int>());
  if (j.contains("counts")) {
    h.counts_ = j.at("counts").get<std::vector<std::int64_t>>();
    if (h.counts_.size() != static_cast<std::size_t>(j.at("bins").get<int>())) {
      throw IoError("histogram count array does not match bin count");
    }
    h.total_ = 0;
    for (auto c : h.counts_) h.total_ += c;
  }
  return h;
}

Histogram2D::Histogram2D(Histogram1D x_axis, Histogram1D y_axis)
    : x_(Histogram1D(x_axis.lo(), x_axis.hi(), x_axis.bins())),
      y_(Histogram1D(y_axis.lo(), y_axis.hi(), y_axis.bins())),
      counts_(static_cast<std::size_t>(x_.bins()) * static_cast<std::size_t>(y_.bins()), 0) {}

void Histogram2D::add(double x, double y) {
  ++counts_[static_cast<std::size_t>(x_.bin_index(x) * y_.bins() + y_.bin_index(y))];
  ++total_;
}

bool Histogram2D::same_edges(const Histogram2D& o) const { return x_.same_edges(o.x_) && y_.same_edges(o.y_); }

void Histogram2D::merge(const Histogram2D& o) {
  if (!same_edges(o)) throw InvalidArgument("cannot merge histograms with different edges");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
  total_ += o.total_;
}

std::vector<double> Histogram2D::density() const {
  std::vector<double> d(counts_.size(), 0.0);
  if (total_ == 0) return d;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(counts_[i]) / static_cast<double>(total_);
  return d;
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw InvalidArgument("densities have different bin counts");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double tv_distance(const Histogram1D& p, const Histogram1D& q) {
  if (!p.same_edges(q)) throw InvalidArgument("histograms have different edges");
  return tv_distance(p.density(), q.density());
}

double tv_distance(const Histogram2D& p, const Histogram2D& q) {
  if (!p.same_edges(q)) throw InvalidArgument("histograms have different edges");
  return tv_distance(p.density(), q.density());
}

MomentSummary moments(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.size() < 2) throw InvalidArgument("moments need at least two samples");
  const auto dim = samples.front().size();
  const auto n = static_cast<double>(samples.size());
  MomentSummary m;
  m.mean = Eigen::VectorXd::Zero(dim);
  for (const auto& s : samples) m.mean += s;
  m.mean /= n;
  Eigen::ArrayXd m2 = Eigen::ArrayXd::Zero(dim), m3 = m2, m4 = m2;
  for (const auto& s : samples) {
    const Eigen::ArrayXd d = (s - m.mean).array();
    const Eigen::ArrayXd d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m.variance = (m2 / (n - 1.0)).matrix();
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.skewness.resize(dim);
  m.excess_kurtosis.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (m2[i] > 0.0) {
      m.skewness[i] = m3[i] / std::pow(m2[i], 1.5);
      m.excess_kurtosis[i] = m4[i] / (m2[i] * m2[i]) - 3.0;
    } else {
      m.skewness[i] = m.excess_kurtosis[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return m;
}

RelativeErrorSeries cumulative_relative_error(const std::vector<double>& series, double truth) {
  RelativeErrorSeries out;
  out.absolute = truth == 0.0;
  out.values.reserve(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    const double err = std::abs(sum / static_cast<double>(i + 1) - truth);
    out.values.push_back(out.absolute ? err : err / std::abs(truth));
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope needs two or more paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("log-log slope needs positive values");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double scalar_variance(const ScalarSpectralField& theta) {
  const int m = theta.cutoff();
  double s = 0.0;
  for (int kx = -m; kx <= m; ++kx) {
    for (int ky = -m; ky <= m; ++ky) {
      if (kx != 0 || ky != 0) s += std::norm(theta.at({kx, ky}));
    }
  }
  return s;
}

double scalar_dissipation(const ScalarSpectralField& theta, double kappa) {
  const double g = sobolev_norm(theta, 1.0);
  return 2.0 * kappa * 4.0 * kPi * kPi * g * g;
}

double enstrophy(const DivFreeVelocityField& field) {
  // |omega_k| = 2 pi |k| |v_k|, and each representative stands for k and -k.
  double s = 0.0;
  for (const auto& [k, v] : field.modes()) s += 2.0 * 4.0 * kPi * kPi * k.norm_squared() * std::norm(v);
  return 0.5 * s;
}

double enstrophy_dissipation(const DivFreeVelocityField& field) {
  double s = 0.0;
  for (const auto& [k, v] : field.modes()) {
    const double k2 = k.norm_squared();
    s += 2.0 * 16.0 * kPi * kPi * kPi * kPi * k2 * k2 * std::norm(v);
  }
  return s;
}

double scalar_difference(const ScalarTrajectory& traj, double t, const Eigen::Vector2d& x, const Eigen::Vector2d& r) {
  return traj.evaluate_point(t, x + r) - traj.evaluate_point(t, x);
}

double compute_observable(const std::string& name, const ObservableInput& in) {
  auto need_field = [&] {
    if (!in.field) throw InvalidArgument("observable '" + name + "' needs a velocity field");
    return *in.field;
  };
  auto need_state = [&] {
    if (!in.trajectory) throw InvalidArgument("observable '" + name + "' needs a scalar trajectory");
    const int n = static_cast<int>(std::lround(in.t / in.trajectory->dt()));
    if (n < 0 || n > in.trajectory->steps() || std::abs(n * in.trajectory->dt() - in.t) > 1e-9) {
      throw OutOfRange("observable time must lie on the trajectory grid");
    }
    return in.trajectory->state(n);
  };
  if (name == "scalar_variance") return scalar_variance(need_state());
  if (name == "scalar_dissipation") return scalar_dissipation(need_state(), in.kappa);
  if (name == "enstrophy") return enstrophy(need_field());
  if (name == "enstrophy_dissipation") return enstrophy_dissipation(need_field());
  if (name == "scalar_difference") {
    if (!in.trajectory) throw InvalidArgument("scalar_difference needs a scalar trajectory");
    return scalar_difference(*in.trajectory, in.t, in.x, in.r);
  }
  throw InvalidArgument("unknown observable '" + name + "'");
}

std::vector<std::size_t> prefix_grid(std::size_t n, int points, std::size_t first) {
  if (n == 0) return {};
  first = std::clamp<std::size_t>(first, 1, n);
  std::vector<std::size_t> out;
  const double ratio = points > 1 ? std::pow(static_cast<double>(n) / first, 1.0 / (points - 1)) : 1.0;
  for (int i = 0; i < points; ++i) {
    const auto m = static_cast<std::size_t>(std::llround(first * std::pow(ratio, i)));
    const std::size_t v = std::clamp<std::size_t>(m, first, n);
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  if (out.back() != n) out.push_back(n);
  return out;
}

Eigen::MatrixXd tv_evolution(const std::vector<std::vector<Eigen::VectorXd>>& chains,
                             const std::vector<Histogram1D>& reference, const std::vector<int>& components,
                             const std::vector<std::size_t>& prefixes) {
  for (int c : components) {
    if (c < 0 || static_cast<std::size_t>(c) >= reference.size()) {
      throw IndexMismatch("component " + std::to_string(c) + " has no reference histogram");
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(prefixes.size()), static_cast<Eigen::Index>(components.size()));
  for (std::size_t col = 0; col < components.size(); ++col) {
    const int c = components[col];
    const Histogram1D& ref = reference[static_cast<std::size_t>(c)];
    Histogram1D h(ref.lo(), ref.hi(), ref.bins());
    std::size_t done = 0;
    for (std::size_t row = 0; row < prefixes.size(); ++row) {
      for (const auto& chain : chains) {
        const std::size_t stop = std::min(prefixes[row], chain.size());
        for (std::size_t i = std::min(done, stop); i < stop; ++i) {
          if (c >= chain[i].size()) throw IndexMismatch("sample shorter than reference dimension");
          h.add(chain[i][c]);
        }
      }
      done = prefixes[row];
      out(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = tv_distance(h, ref);
    }
  }
  return out;
}

int count_modes(const std::vector<double>& density, double high, double trough) {
  if (density.empty()) return 0;
  const double peak = *std::max_element(density.begin(), density.end());
  if (!(peak > 0.0)) return 0;
  int modes = 0;
  bool in_mode = false;
  bool dipped = true;  // a trough has been seen since the last mode
  for (double d : density) {
    if (d >= high * peak) {
      if (!in_mode && dipped) ++modes;
      in_mode = true;
      dipped = false;
    } else {
      in_mode = false;
      if (d < trough * peak) dipped = true;
    }
  }
  return modes;
}

int count_jumps(const std::vector<double>& series, double threshold) {
  int side = 0;
  int jumps = 0;
  for (double x : series) {
    const int s = x > threshold ? 1 : (x < -threshold ? -1 : 0);
    if (s == 0) continue;
    if (side != 0 && s != side) ++jumps;
    side = s;
  }
  return jumps;
}

}  // namespace flowinfer
