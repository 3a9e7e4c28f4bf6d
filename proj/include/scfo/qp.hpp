#ifndef SCFO_QP_HPP
#define SCFO_QP_HPP

#include <utility>

#include "scfo/types.hpp"

namespace scfo {

// minimize 1/2 x' diag(q) x + c' x  subject to  A x <= b,  lo <= x <= hi.
// q must be componentwise >= 0. Entries of lo/hi may be +-inf.
struct QpProblem {
  VectorXd q_diag;
  VectorXd linear;
  MatrixXd A;
  VectorXd b;
  VectorXd x_lo, x_hi;

  int n() const { return static_cast<int>(q_diag.size()); }
};

enum class QpStatus { Optimal, Infeasible, IterationLimit };

struct QpResult {
  QpStatus status = QpStatus::IterationLimit;
  VectorXd x;
  double kkt_residual = kInf;
  int iterations = 0;
};

struct QpOptions {
  double tol = 1e-9;
  // Strictness margin required of feasibility witnesses (see lp_feasible).
  double feasibility_margin = 1e-9;
  // Zero diagonal entries are lifted to this value so the active-set
  // subproblems stay solvable; flat directions of the true problem carry no
  // objective, so the bias on the strictly convex block is O(this).
  double flat_regularization = 1e-10;
  int max_iterations = 0;  // 0: automatic from problem size
};

// Dense primal active-set solver. Phase 1 runs through lp_feasible below.
QpResult solve_qp(const QpProblem& qp, const QpOptions& opts = {});

struct LpFeasibility {
  bool feasible = false;
  VectorXd witness;
  double max_violation = kInf;  // minimized worst constraint value A x - b
};

// Feasibility of {x : A x <= b, lo <= x <= hi}, decided by minimizing an
// auxiliary worst-violation variable with the same active-set machinery.
// Feasible means a witness with every constraint satisfied by at least the
// configured margin.
LpFeasibility lp_feasible(const MatrixXd& A, const VectorXd& b, const VectorXd& lo,
                          const VectorXd& hi, const QpOptions& opts = {});

}  // namespace scfo

#endif  // SCFO_QP_HPP
