#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "flowinfer/flow_field.hpp"
#include "flowinfer/forward_solver.hpp"
#include "flowinfer/scalar_field.hpp"
#include "json.hpp"

namespace flowinfer {

/// Biased normalized autocorrelation, lags 0..max_lag.
std::vector<double> autocorrelation(const std::vector<double>& series, int max_lag);

/// Standard error of the mean from non-overlapping batch means
/// (batches of about n^(2/3) values), which accounts for serial correlation.
double batch_means_stderr(const std::vector<double>& series);

/// Uniform bins over [lo, hi); values outside are counted in the end bins.
class Histogram1D {
 public:
  Histogram1D(double lo, double hi, int bins);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int bins() const { return static_cast<int>(counts_.size()); }
  double edge(int i) const { return lo_ + (hi_ - lo_) * i / bins(); }
  double centre(int i) const { return lo_ + (hi_ - lo_) * (i + 0.5) / bins(); }

  int bin_index(double x) const;
  void add(double x);
  void merge(const Histogram1D& other);
  bool same_edges(const Histogram1D& other) const;

  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t total() const { return total_; }
  /// Bin probabilities summing to one.
  std::vector<double> density() const;

  nlohmann::json to_json() const;
  static Histogram1D from_json(const nlohmann::json& j);
  friend bool operator==(const Histogram1D&, const Histogram1D&) = default;

 private:
  double lo_;
  double hi_;
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

class Histogram2D {
 public:
  Histogram2D(Histogram1D x_axis, Histogram1D y_axis);

  const Histogram1D& x_axis() const { return x_; }
  const Histogram1D& y_axis() const { return y_; }

  void add(double x, double y);
  void merge(const Histogram2D& other);
  bool same_edges(const Histogram2D& other) const;

  const std::vector<std::int64_t>& counts() const { return counts_; }  // row-major, x major
  std::int64_t total() const { return total_; }
  std::vector<double> density() const;

  friend bool operator==(const Histogram2D&, const Histogram2D&) = default;

 private:
  Histogram1D x_;
  Histogram1D y_;
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

/// 0.5 sum |p_i - q_i| over normalized densities with identical edges.
double tv_distance(const Histogram1D& p, const Histogram1D& q);
double tv_distance(const Histogram2D& p, const Histogram2D& q);
double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;  // unbiased
  Eigen::VectorXd skewness;  // NaN when the variance is zero
  Eigen::VectorXd excess_kurtosis;
};

MomentSummary moments(const std::vector<Eigen::VectorXd>& samples);

struct RelativeErrorSeries {
  std::vector<double> values;
  bool absolute = false;  // truth == 0, so |CMA_n - truth| is reported
};

/// |CMA_n - truth| / |truth| for every prefix length n.
RelativeErrorSeries cumulative_relative_error(const std::vector<double>& series, double truth);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// ||theta - mean||^2 over the unit torus.
double scalar_variance(const ScalarSpectralField& theta);
/// 2 kappa ||grad theta||^2.
double scalar_dissipation(const ScalarSpectralField& theta, double kappa);
/// 0.5 ||curl v||^2.
double enstrophy(const DivFreeVelocityField& field);
/// ||grad curl v||^2.
double enstrophy_dissipation(const DivFreeVelocityField& field);
/// theta(t, x + r) - theta(t, x).
double scalar_difference(const ScalarTrajectory& traj, double t, const Eigen::Vector2d& x, const Eigen::Vector2d& r);

struct ObservableInput {
  const DivFreeVelocityField* field = nullptr;
  const ScalarTrajectory* trajectory = nullptr;
  double t = 0.0;
  double kappa = 0.0;
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  Eigen::Vector2d r = Eigen::Vector2d::Zero();
};

/// Dispatches on {scalar_variance, scalar_dissipation, enstrophy,
/// enstrophy_dissipation, scalar_difference}; scalar observables use the
/// trajectory state at time t.
double compute_observable(const std::string& name, const ObservableInput& in);

/// Roughly geometric prefix lengths from `first` to n inclusive, deduplicated.
std::vector<std::size_t> prefix_grid(std::size_t n, int points, std::size_t first = 10);

/// Row i: per-component TV between the pooled first prefixes[i] samples of
/// every chain and the reference histogram of that component.
Eigen::MatrixXd tv_evolution(const std::vector<std::vector<Eigen::VectorXd>>& chains,
                             const std::vector<Histogram1D>& reference, const std::vector<int>& components,
                             const std::vector<std::size_t>& prefixes);

/// Number of separated modes: runs of bins above `high` * peak, where
/// consecutive runs must be divided by a bin below `trough` * peak.
int count_modes(const std::vector<double>& density, double high = 0.10, double trough = 0.05);

/// Sign switches of a series with hysteresis: a jump is counted when the
/// series moves from above +threshold to below -threshold or back.
int count_jumps(const std::vector<double>& series, double threshold);

}  // namespace flowinfer
