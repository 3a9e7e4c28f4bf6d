#include "scfo/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace scfo {

namespace {

// Rows of the expanded constraint system G x <= h: the caller's A rows first,
// then finite box faces.
struct RowSystem {
  MatrixXd G;
  VectorXd h;
};

RowSystem expand_rows(const QpProblem& qp) {
  const int n = qp.n();
  std::vector<std::pair<VectorXd, double>> rows;
  for (int r = 0; r < qp.A.rows(); ++r)
    rows.emplace_back(qp.A.row(r).transpose(), qp.b(r));
  for (int i = 0; i < n; ++i) {
    if (qp.x_hi(i) < kInf) {
      VectorXd e = VectorXd::Zero(n);
      e(i) = 1.0;
      rows.emplace_back(e, qp.x_hi(i));
    }
    if (qp.x_lo(i) > -kInf) {
      VectorXd e = VectorXd::Zero(n);
      e(i) = -1.0;
      rows.emplace_back(e, -qp.x_lo(i));
    }
  }
  RowSystem sys;
  sys.G.resize(static_cast<int>(rows.size()), n);
  sys.h.resize(static_cast<int>(rows.size()));
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
    sys.G.row(r) = rows[r].first.transpose();
    sys.h(r) = rows[r].second;
  }
  return sys;
}

// Active-set iterations from a feasible start. H is diagonal positive.
QpResult active_set(const VectorXd& H, const VectorXd& c, const RowSystem& sys,
                    VectorXd x, const QpOptions& opts) {
  const int n = static_cast<int>(H.size());
  const int m = static_cast<int>(sys.h.size());
  const int cap = opts.max_iterations > 0 ? opts.max_iterations : 80 * (n + m + 1);

  std::vector<int> active;
  QpResult res;
  res.x = x;

  auto grad = [&](const VectorXd& xx) { return (H.array() * xx.array()).matrix() + c; };

  for (res.iterations = 0; res.iterations < cap; ++res.iterations) {
    const VectorXd g = grad(x);
    const int na = static_cast<int>(active.size());

    VectorXd p = VectorXd::Zero(n);
    MatrixXd At(n, na);  // columns are active normals
    for (int a = 0; a < na; ++a) At.col(a) = sys.G.row(active[a]).transpose();

    Eigen::ColPivHouseholderQR<MatrixXd> qr;
    int rank = 0;
    if (na > 0) {
      qr.compute(At);
      rank = static_cast<int>(qr.rank());
    }
    if (na == 0) {
      p = -(g.array() / H.array()).matrix();
    } else if (rank < n) {
      MatrixXd Q = qr.householderQ();
      MatrixXd Z = Q.rightCols(n - rank);
      MatrixXd Hr = Z.transpose() * H.asDiagonal() * Z;
      VectorXd gr = Z.transpose() * g;
      p = -Z * Hr.ldlt().solve(gr);
    }  // rank == n: vertex, p stays zero

    if (p.lpNorm<Eigen::Infinity>() <= opts.tol) {
      // Multipliers: least-squares solve of At * lambda = -g.
      bool drop = false;
      if (na > 0) {
        VectorXd lambda =
            At.completeOrthogonalDecomposition().solve(-g);
        int worst = -1;
        double worst_val = -opts.tol;
        for (int a = 0; a < na; ++a)
          if (lambda(a) < worst_val) {
            worst_val = lambda(a);
            worst = a;
          }
        if (worst >= 0) {
          active.erase(active.begin() + worst);
          drop = true;
        }
      }
      if (!drop) {
        res.x = x;
        res.status = QpStatus::Optimal;
        // KKT residual: stationarity + worst feasibility violation.
        VectorXd lambda = na > 0
                              ? VectorXd(At.completeOrthogonalDecomposition().solve(-g))
                              : VectorXd();
        VectorXd stat = g;
        for (int a = 0; a < na; ++a) stat += lambda(a) * At.col(a);
        double viol = 0.0;
        if (m > 0) viol = std::max(0.0, (sys.G * x - sys.h).maxCoeff());
        res.kkt_residual = std::max(stat.lpNorm<Eigen::Infinity>(), viol);
        return res;
      }
      continue;
    }

    // Ratio test against inactive rows.
    double alpha = 1.0;
    int blocking = -1;
    for (int r = 0; r < m; ++r) {
      bool is_active = false;
      for (int a : active)
        if (a == r) { is_active = true; break; }
      if (is_active) continue;
      const double d = sys.G.row(r).dot(p);
      if (d > opts.tol) {
        const double room = sys.h(r) - sys.G.row(r).dot(x);
        const double a_r = room / d;
        if (a_r < alpha) {
          alpha = std::max(a_r, 0.0);
          blocking = r;
        }
      }
    }
    x += alpha * p;
    if (blocking >= 0) active.push_back(blocking);
  }
  res.x = x;
  res.status = QpStatus::IterationLimit;
  return res;
}

VectorXd interior_start(const VectorXd& lo, const VectorXd& hi) {
  const int n = static_cast<int>(lo.size());
  VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    const bool flo = lo(i) > -kInf, fhi = hi(i) < kInf;
    if (flo && fhi)
      x(i) = 0.5 * (lo(i) + hi(i));
    else if (flo)
      x(i) = lo(i) + 1.0;
    else if (fhi)
      x(i) = hi(i) - 1.0;
    else
      x(i) = 0.0;
  }
  return x;
}

}  // namespace

LpFeasibility lp_feasible(const MatrixXd& A, const VectorXd& b, const VectorXd& lo,
                          const VectorXd& hi, const QpOptions& opts) {
  const int n = static_cast<int>(lo.size());
  LpFeasibility out;
  VectorXd x0 = interior_start(lo, hi);
  if (A.rows() == 0) {
    out.feasible = true;
    out.witness = x0;
    out.max_violation = -kInf;
    return out;
  }

  // Auxiliary problem over (x, m): minimize m subject to A x - m 1 <= b.
  QpProblem aux;
  aux.q_diag = VectorXd::Constant(n + 1, opts.flat_regularization);
  aux.linear = VectorXd::Zero(n + 1);
  aux.linear(n) = 1.0;
  aux.A.resize(A.rows(), n + 1);
  aux.A.leftCols(n) = A;
  aux.A.col(n) = VectorXd::Constant(A.rows(), -1.0);
  aux.b = b;
  aux.x_lo.resize(n + 1);
  aux.x_hi.resize(n + 1);
  aux.x_lo.head(n) = lo;
  aux.x_hi.head(n) = hi;
  const double m0 = std::max((A * x0 - b).maxCoeff(), 0.0) + 1.0;
  aux.x_lo(n) = -1e3;
  aux.x_hi(n) = m0 + 1.0;

  RowSystem sys = expand_rows(aux);
  VectorXd start(n + 1);
  start.head(n) = x0;
  start(n) = m0;
  VectorXd H = aux.q_diag.cwiseMax(opts.flat_regularization);
  QpResult r = active_set(H, aux.linear, sys, start, opts);

  out.witness = r.x.head(n);
  out.max_violation = (A * out.witness - b).maxCoeff();
  out.feasible =
      r.status != QpStatus::IterationLimit && out.max_violation <= -opts.feasibility_margin;
  return out;
}

QpResult solve_qp(const QpProblem& qp, const QpOptions& opts) {
  QpResult res;
  LpFeasibility feas = lp_feasible(qp.A, qp.b, qp.x_lo, qp.x_hi, opts);
  // A zero-margin retry distinguishes truly empty sets from thin ones.
  if (!feas.feasible) {
    if (feas.max_violation > 0.0) {
      res.status = QpStatus::Infeasible;
      res.x = feas.witness;
      return res;
    }
  }
  RowSystem sys = expand_rows(qp);
  VectorXd H = qp.q_diag.cwiseMax(opts.flat_regularization);
  res = active_set(H, qp.linear, sys, feas.witness, opts);
  return res;
}

}  // namespace scfo
