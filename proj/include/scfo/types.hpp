#ifndef SCFO_TYPES_HPP
#define SCFO_TYPES_HPP

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scfo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Identifies which function a set of constants or an estimate refers to:
// the experimental cost, or the j-th experimental constraint.
struct FnId {
  bool is_cost = true;
  int constraint = -1;  // valid when !is_cost

  static FnId cost() { return FnId{true, -1}; }
  static FnId g(int j) { return FnId{false, j}; }
};

// Axis-aligned box in decision space crossed with a time interval.
struct Region {
  VectorXd lo, hi;
  double t_lo = 0.0, t_hi = 0.0;

  static Region point(const VectorXd& u, double tau) {
    return Region{u, u, tau, tau};
  }
  // Smallest region containing both operands.
  Region merged(const Region& o) const {
    Region r;
    r.lo = lo.cwiseMin(o.lo);
    r.hi = hi.cwiseMax(o.hi);
    r.t_lo = std::min(t_lo, o.t_lo);
    r.t_hi = std::max(t_hi, o.t_hi);
    return r;
  }
};

// A lower/upper pair for one scalar constant.
struct Band {
  double lo = 0.0, hi = 0.0;
};

// First-order constants of one function over some region: per-dimension
// bands on the decision-variable derivatives plus a band on the time
// (degradation) derivative.
struct FnConstants {
  VectorXd du_lo, du_hi;
  Band dtau;
};

// Numerical constraint g_j(u) <= 0 with exact evaluator, gradient, and a
// callback giving the (possibly conservative) maximum over a ball.
struct NumericalConstraint {
  std::function<double(const VectorXd&)> eval;
  std::function<VectorXd(const VectorXd&)> grad;
  // Exact value or upper bound on max of g_j over {x : |x - center| <= radius}.
  std::function<double(const VectorXd&, double)> ball_max;
};

enum class CostKind { Experimental, Numerical };

// Numerical cost function, present when cost_kind == Numerical.
struct NumericalCost {
  std::function<double(const VectorXd&)> eval;
  std::function<VectorXd(const VectorXd&)> grad;
};

struct ProblemSpec {
  int n_u = 0;
  VectorXd u_lower, u_upper;
  int n_gp = 0;
  std::vector<NumericalConstraint> numerical_constraints;
  CostKind cost_kind = CostKind::Experimental;
  std::optional<NumericalCost> numerical_cost;

  int n_g() const { return static_cast<int>(numerical_constraints.size()); }
};

// One experiment: decision variables, its time stamp, and the noisy values
// observed. cost_hat is absent for numerical-cost problems, and may also be
// absent on old records after a cost-reset event (the measured values no
// longer describe the current cost function).
struct Measurement {
  VectorXd u;
  double time = 0.0;
  std::optional<double> cost_hat;
  VectorXd g_hat;
};

// Lower/upper bounds on a true function value at one record.
struct ValueInterval {
  double lo = -kInf;
  double hi = kInf;
  bool finite() const { return lo > -kInf && hi < kInf; }
};

class History {
 public:
  const std::vector<Measurement>& records() const { return records_; }
  const Measurement& record(int k) const { return records_.at(k); }
  int size() const { return static_cast<int>(records_.size()); }
  bool empty() const { return records_.empty(); }

  // Times must be nondecreasing; violating appends are rejected.
  void append(Measurement m) {
    if (!records_.empty() && m.time < records_.back().time)
      throw std::invalid_argument("History::append: time must be nondecreasing");
    records_.push_back(std::move(m));
  }

  // Drops cost measurements of all records with index < k. Used when the cost
  // function changes mid-run and old cost data no longer applies.
  void invalidate_cost_before(int k) {
    for (int i = 0; i < std::min(k, size()); ++i) records_[i].cost_hat.reset();
  }

  // Value intervals filled in by pretreatment (one per record, cost first).
  std::vector<ValueInterval> cost_intervals;                // size()
  std::vector<std::vector<ValueInterval>> g_intervals;      // size() x n_gp

 private:
  std::vector<Measurement> records_;
};

// Optional provider of sharper constants over subregions; outputs are clamped
// into the global intervals by local_constants().
using LocalConstantsProvider =
    std::function<std::optional<FnConstants>(FnId, const Region&)>;
using LocalMProvider =
    std::function<std::optional<std::pair<MatrixXd, MatrixXd>>(const Region&)>;

struct LipschitzSet {
  // Experimental constraints: n_gp x n_u derivative bands (strict) and
  // per-constraint time-derivative bands (non-strict).
  MatrixXd g_lower, g_upper;
  VectorXd g_time_lower, g_time_upper;
  // Experimental cost: first-order bands (non-strict) plus time band.
  VectorXd cost_lower, cost_upper;
  double cost_time_lower = 0.0, cost_time_upper = 0.0;
  // Second-order constants of the cost (strict).
  MatrixXd M_lower, M_upper;

  LocalConstantsProvider local_provider;
  LocalMProvider local_M_provider;

  FnConstants global(FnId fn) const {
    FnConstants c;
    if (fn.is_cost) {
      c.du_lo = cost_lower;
      c.du_hi = cost_upper;
      c.dtau = Band{cost_time_lower, cost_time_upper};
    } else {
      c.du_lo = g_lower.row(fn.constraint).transpose();
      c.du_hi = g_upper.row(fn.constraint).transpose();
      c.dtau = Band{g_time_lower(fn.constraint), g_time_upper(fn.constraint)};
    }
    return c;
  }
};

// Clamped local constants over a region; falls back to the global values when
// no provider is installed.
FnConstants local_constants(const LipschitzSet& lip, FnId fn, const Region& region);

// Local second-order constants of the cost over a region, clamped into the
// global M intervals.
std::pair<MatrixXd, MatrixXd> local_M(const LipschitzSet& lip, const Region& region);

// Partial concavity/convexity declarations (index set + eta flag).
struct IndexSetFlag {
  std::vector<int> indices;  // subset of {0..n_u-1}
  bool eta = false;          // true: relation also holds jointly with tau

  bool contains(int i) const {
    for (int v : indices)
      if (v == i) return true;
    return false;
  }
};

using LocalStructureProvider =
    std::function<std::optional<IndexSetFlag>(FnId fn, bool convexity, const Region&)>;

struct StructureInfo {
  std::vector<IndexSetFlag> conc_g;  // per experimental constraint
  IndexSetFlag conv_cost;            // I_v,phi
  IndexSetFlag conc_cost;            // I_c,phi
  LocalStructureProvider local_provider;

  // Concavity of constraint j (convexity=false) or cost convexity/concavity
  // over a region; defaults to the global sets.
  IndexSetFlag local(FnId fn, bool convexity, const Region& region) const {
    if (local_provider) {
      auto r = local_provider(fn, convexity, region);
      if (r) return *r;
    }
    if (!fn.is_cost) return convexity ? IndexSetFlag{} : conc_g.at(fn.constraint);
    return convexity ? conv_cost : conc_cost;
  }
};

enum class NoiseKind { Gaussian, Chebyshev, TruncatedGaussian };

// Additive measurement-noise description, independent across functions and
// iterations. sigma holds one entry per function: cost first (when the cost
// is experimental), then the experimental constraints.
struct NoiseModel {
  NoiseKind kind = NoiseKind::Gaussian;
  VectorXd sigma;
  double mean = 0.0;      // Chebyshev only
  double coverage = 0.99; // Chebyshev only, 0 < p < 1

  double sigma_for(FnId fn, bool cost_is_experimental) const {
    int idx = fn.is_cost ? 0 : (cost_is_experimental ? 1 + fn.constraint : fn.constraint);
    return sigma(idx);
  }
};

// Band on the average of N independent noise terms for one function.
Band noise_band(const NoiseModel& model, FnId fn, bool cost_is_experimental, int n_repeats);

struct SlackPolicy {
  VectorXd d_max_g;            // \bar d_{p,j} >= 0
  VectorXd d_max_num;          // \bar d_j >= 0
  VectorXd integral_budget_g;  // d^S_{p,j} > 0
  VectorXd integral_budget_num;
  VectorXd beta_g;             // in [0, 1), bounded by (d^S - \bar d)/d^S
  VectorXd beta_num;

  static SlackPolicy none(int n_gp, int n_g) {
    SlackPolicy p;
    p.d_max_g = VectorXd::Zero(n_gp);
    p.d_max_num = VectorXd::Zero(n_g);
    p.integral_budget_g = VectorXd::Constant(n_gp, 1.0);
    p.integral_budget_num = VectorXd::Constant(n_g, 1.0);
    p.beta_g = VectorXd::Zero(n_gp);
    p.beta_num = VectorXd::Zero(n_g);
    return p;
  }
};

struct SlackState {
  VectorXd d_g;    // current d^k_{p,j}
  VectorXd d_num;  // current d^k_j

  static SlackState initial(const SlackPolicy& p) {
    return SlackState{p.d_max_g, p.d_max_num};
  }
};

// Projection parameters (current values and the seeds they started from).
struct ProjectionParams {
  VectorXd eps_p, eps_g;      // epsilon_{p,j}, epsilon_j
  VectorXd delta_gp, delta_g; // delta_{g_p,j}, delta_{g,j}
  double delta_phi = 0.0;

  ProjectionParams halved() const {
    return ProjectionParams{eps_p / 2, eps_g / 2, delta_gp / 2, delta_g / 2,
                            delta_phi / 2};
  }
};

// Gradient estimate with componentwise bounds, plus the matching triple for
// the time derivative; produced by a plug-in estimation algorithm.
struct GradientEstimate {
  VectorXd estimate, lower, upper;
  double dtau_estimate = 0.0;
  Band dtau;
  VectorXd at_u;
  double at_tau = 0.0;
};

// Plug-in gradient estimation interface: returns an estimate of the gradient
// of `fn` at (u, tau) from the available data, or nullopt when no estimate
// can be formed.
using GradientOracle =
    std::function<std::optional<GradientEstimate>(FnId, const VectorXd& u, double tau)>;

enum class ReferenceRule { Primary, NumericalPrimary, SafePointU0, Minimax };
enum class LineSearchVariant { Full, NoFutureDegradation, Zero };

// Which of the eight algorithmic branches produced the advice: reference in
// {primary, u0-fallback} crossed with step in {line search, relaxed line
// search, K=0, excitation override}.
struct Scenario {
  ReferenceRule reference = ReferenceRule::Primary;
  LineSearchVariant variant = LineSearchVariant::Zero;
  bool excitation_override = false;

  std::string label() const;
};

struct Advice {
  VectorXd u_next;
  int k_star = 0;
  double gain = 0.0;  // K_k
  Scenario scenario;
  // Diagnostics
  ProjectionParams final_params;
  double robustness = 0.0;  // P
  SlackState slack_next;
  bool excitation_overridden = false;
  VectorXd projected_target;
  std::vector<std::string> warnings;
};

}  // namespace scfo

#endif  // SCFO_TYPES_HPP
