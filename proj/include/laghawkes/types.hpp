#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace laghawkes {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using MaskMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Base rates are floored away from zero so log-intensities stay finite.
inline constexpr double kMuFloor = 1e-8;

/// Raised when an evaluation produced a non-finite or otherwise invalid
/// intermediate; the message names the offending location.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by file / stream parsing; carries path and line where applicable.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Event {
  double t = 0.0;  // occurrence time, nonnegative
  int u = 0;       // dimension index in [0, U)
};

/// One realization of the process: typed, timestamped events on [0, T].
///
/// Ingest enforces the invariants: times nonnegative and <= horizon,
/// dimension indices in range, events sorted by time and no two events
/// (across dimensions) sharing a timestamp. Duplicate timestamps are
/// rejected rather than jittered.
class EventSequence {
 public:
  EventSequence(std::vector<Event> events, double horizon, int num_dims);

  const std::vector<Event>& events() const { return events_; }
  double horizon() const { return horizon_; }
  int num_dims() const { return num_dims_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  /// Times of the events of dimension u, sorted ascending.
  std::vector<double> times_of(int u) const;
  /// Per-dimension event counts N_u.
  std::vector<int> counts() const;

 private:
  std::vector<Event> events_;
  double horizon_;
  int num_dims_;
};

enum class KernelFamily { Exponential };

/// Triggering-kernel selector. The exponential kernel carries no extra
/// fields here; its magnitude, decay and delay live in ModelParams.
struct KernelSpec {
  KernelFamily family = KernelFamily::Exponential;
};

/// Boolean adjacency over dimension pairs: adjacency(u, v) is true iff
/// an edge v -> u is permitted, i.e. events of v may excite dimension u.
/// Pairs with adjacency false force a_uv = 0 and delta_uv = 0.
struct CausalGraph {
  MaskMat adjacency;

  static CausalGraph full(int num_dims);
  static CausalGraph none(int num_dims);

  int num_dims() const { return static_cast<int>(adjacency.rows()); }
  bool allowed(int u, int v) const { return adjacency(u, v); }
  void validate() const;
};

/// Decoder parameters: base rates mu (per dimension), impact matrix A,
/// decay matrix B and delay matrix D. Row index is the target dimension,
/// column index the source, so D(u, v) is the lag of the effect v -> u.
struct ModelParams {
  Vec mu;  // length U, entries >= kMuFloor
  Mat A;   // U x U, nonnegative impacts a_uv
  Mat B;   // U x U, positive decays beta_uv
  Mat D;   // U x U, nonnegative delays delta_uv

  int num_dims() const { return static_cast<int>(mu.size()); }

  /// Throws std::invalid_argument on shape mismatch, non-finite entries,
  /// out-of-range values, or (when a graph is given) nonzero A/D entries
  /// on masked pairs.
  void validate(const CausalGraph* graph = nullptr) const;
};

enum class LagFamily { ExponentialRate, Gaussian, LogNormal };

std::string lag_family_name(LagFamily f);
LagFamily lag_family_from_name(const std::string& name);

/// Per-pair parametric lag distribution, used both as prior p(delta) and
/// as posterior q(delta | H).
///
/// Parameter layout by family:
///   ExponentialRate: p1 = rate gamma > 0, p2 unused (0)
///   Gaussian:        p1 = mean m, p2 = stddev s
///   LogNormal:       p1 = log-mean m, p2 = log-stddev s
///
/// A pair with p2 == 0 (Gaussian / LogNormal) is a degenerate point mass,
/// which is how fitted point estimates enter the prediction path. Masked
/// pairs carry p1 = p2 = 0: a point mass at zero delay.
struct LagPosterior {
  LagFamily family = LagFamily::ExponentialRate;
  Mat p1;
  Mat p2;

  static LagPosterior constant(LagFamily family, int num_dims, double v1, double v2,
                               const CausalGraph& graph);
  /// Point mass at the given delay matrix (Gaussian family with s = 0).
  static LagPosterior point_mass(const Mat& delays, const CausalGraph& graph);

  int num_dims() const { return static_cast<int>(p1.rows()); }

  /// Mean of the pair's lag distribution (the reported "posterior mean"):
  /// 1/gamma, m, or exp(m + s^2/2) by family. Masked pairs give 0.
  double mean(int u, int v) const;
  Mat mean_matrix() const;

  void validate(const CausalGraph& graph) const;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

}  // namespace laghawkes
