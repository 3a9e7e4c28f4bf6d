#include "scfo/pretreat.hpp"

#include <algorithm>
#include <cmath>

namespace scfo {

namespace {

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

std::optional<double> record_value(const Measurement& m, FnId fn) {
  if (fn.is_cost) {
    if (!m.cost_hat) return std::nullopt;
    return *m.cost_hat;
  }
  return m.g_hat(fn.constraint);
}

// One growth round of the three-phase schedule on a lower/upper pair.
void grow_pair(double* lo, double* hi, int round) {
  if (round <= 5) {
    *lo = std::pow(2.0, -sign(*lo)) * (*lo);
    *hi = std::pow(2.0, sign(*hi)) * (*hi);
  } else if (round <= 10) {
    const double m = std::max(std::abs(*lo), std::abs(*hi));
    *lo = -2.0 * m;
    *hi = 2.0 * m;
  } else {
    const double f = std::pow(2.0, round - 10);
    *lo *= f;
    *hi *= f;
  }
}

const GradientEstimate* gradient_at(const std::vector<RecordGradients>& gradients,
                                    int record, FnId fn) {
  if (record >= static_cast<int>(gradients.size())) return nullptr;
  const RecordGradients& rg = gradients[record];
  if (fn.is_cost) return rg.cost ? &*rg.cost : nullptr;
  if (fn.constraint >= static_cast<int>(rg.g.size())) return nullptr;
  return rg.g[fn.constraint] ? &*rg.g[fn.constraint] : nullptr;
}

}  // namespace

Region two_record_region(const Measurement& a, const Measurement& b) {
  Region r;
  r.lo = a.u.cwiseMin(b.u);
  r.hi = a.u.cwiseMax(b.u);
  r.t_lo = std::min(a.time, b.time);
  r.t_hi = std::max(a.time, b.time);
  return r;
}

std::vector<ValueInterval> conservative_intervals(const History& history, FnId fn,
                                                  const ProblemSpec& spec,
                                                  const NoiseModel& noise) {
  const bool cost_exp = spec.cost_kind == CostKind::Experimental;
  std::vector<ValueInterval> out(history.size());
  const Band w = noise_band(noise, fn, cost_exp, 1);
  for (int k = 0; k < history.size(); ++k) {
    auto v = record_value(history.record(k), fn);
    if (!v) continue;
    out[k] = ValueInterval{*v - w.hi, *v - w.lo};
  }
  return out;
}

ConsistencyOutcome consistency_check_first_order(
    const History& history, const std::vector<ValueInterval>& conservative,
    FnConstants* constants, const PretreatConfig& cfg) {
  ConsistencyOutcome out;
  const int n = static_cast<int>(constants->du_lo.size());
  const int count = history.size();

  auto consistent = [&]() {
    for (int k1 = 0; k1 < count; ++k1) {
      if (!conservative[k1].finite()) continue;
      for (int k2 = 0; k2 < count; ++k2) {
        if (k2 == k1 || !conservative[k2].finite()) continue;
        const Measurement& a = history.record(k1);
        const Measurement& b = history.record(k2);
        const double dtau = b.time - a.time;
        double up = conservative[k1].hi + band_max(constants->dtau, dtau);
        double dn = conservative[k1].lo + band_min(constants->dtau, dtau);
        for (int i = 0; i < n; ++i) {
          const Band bi{constants->du_lo(i), constants->du_hi(i)};
          const double du = b.u(i) - a.u(i);
          up += band_max(bi, du);
          dn += band_min(bi, du);
        }
        if (conservative[k2].lo > up || conservative[k2].hi < dn) return false;
      }
    }
    return true;
  };

  for (int round = 1; !consistent(); ++round) {
    if (round > cfg.growth_cap) {
      out.capped = true;
      break;
    }
    for (int i = 0; i < n; ++i) grow_pair(&constants->du_lo(i), &constants->du_hi(i), round);
    grow_pair(&constants->dtau.lo, &constants->dtau.hi, round);
    out.rounds = round;
    out.modified = true;
  }
  return out;
}

ConsistencyOutcome consistency_check_second_order(
    const History& history, const std::vector<ValueInterval>& conservative,
    const std::vector<RecordGradients>& gradients, const Band& kappa_tau,
    MatrixXd* M_lower, MatrixXd* M_upper, const PretreatConfig& cfg) {
  ConsistencyOutcome out;
  const int n = static_cast<int>(M_lower->rows());
  const int count = history.size();

  auto consistent = [&]() {
    for (int k1 = 0; k1 < count; ++k1) {
      if (!conservative[k1].finite()) continue;
      const GradientEstimate* grad = gradient_at(gradients, k1, FnId::cost());
      if (!grad) continue;
      for (int k2 = 0; k2 < count; ++k2) {
        if (k2 == k1 || !conservative[k2].finite()) continue;
        const Measurement& a = history.record(k1);
        const Measurement& b = history.record(k2);
        const double dtau = b.time - a.time;
        double up = conservative[k1].hi + band_max(kappa_tau, dtau);
        double dn = conservative[k1].lo + band_min(kappa_tau, dtau);
        for (int i = 0; i < n; ++i) {
          const Band gi{grad->lower(i), grad->upper(i)};
          const double du = b.u(i) - a.u(i);
          up += band_max(gi, du);
          dn += band_min(gi, du);
        }
        for (int i1 = 0; i1 < n; ++i1)
          for (int i2 = 0; i2 < n; ++i2) {
            const Band m{(*M_lower)(i1, i2), (*M_upper)(i1, i2)};
            const double prod = (b.u(i1) - a.u(i1)) * (b.u(i2) - a.u(i2));
            up += 0.5 * band_max(m, prod);
            dn += 0.5 * band_min(m, prod);
          }
        if (conservative[k2].lo > up || conservative[k2].hi < dn) return false;
      }
    }
    return true;
  };

  for (int round = 1; !consistent(); ++round) {
    if (round > cfg.growth_cap) {
      out.capped = true;
      break;
    }
    for (int i1 = 0; i1 < n; ++i1)
      for (int i2 = 0; i2 < n; ++i2) grow_pair(&(*M_lower)(i1, i2), &(*M_upper)(i1, i2), round);
    out.rounds = round;
    out.modified = true;
  }
  return out;
}

namespace {

// Time-extrapolation term of the repeated-measurement bound: the gradient
// box when the eta relaxation applies and an estimate exists, the local
// Lipschitz band otherwise. `upper` selects max (upper bound side) vs min.
double time_term(bool eta, const GradientEstimate* grad, const Band& kappa_tau,
                 double dtau, bool upper) {
  if (eta && grad) return upper ? band_max(grad->dtau, dtau) : band_min(grad->dtau, dtau);
  return upper ? band_max(kappa_tau, dtau) : band_min(kappa_tau, dtau);
}

}  // namespace

IntervalDiagnostics compute_intervals(const History& history, FnId fn,
                                      const ProblemSpec& spec, const LipschitzSet& lip,
                                      const StructureInfo& structure,
                                      const NoiseModel& noise,
                                      const std::vector<RecordGradients>& gradients,
                                      std::vector<ValueInterval>* intervals,
                                      const PretreatConfig& cfg) {
  IntervalDiagnostics diag;
  const bool cost_exp = spec.cost_kind == CostKind::Experimental;
  const int count = history.size();
  intervals->assign(count, ValueInterval{});

  // Phase 1: repeated-measurement bounds over sample groups.
  for (int kb = 0; kb < count; ++kb) {
    const Measurement& base = history.record(kb);
    if (!record_value(base, fn)) continue;

    std::vector<int> group;
    for (int t = 0; t < count; ++t)
      if (record_value(history.record(t), fn) &&
          (history.record(t).u.array() == base.u.array()).all())
        group.push_back(t);
    const int n_bar = static_cast<int>(group.size());

    std::vector<std::vector<int>> subsets;
    for (int t : group) subsets.push_back({t});
    if (n_bar > 1) {
      if (cfg.full_subset_enumeration && n_bar <= cfg.full_subset_cap) {
        for (unsigned mask = 1; mask < (1u << n_bar); ++mask) {
          if (__builtin_popcount(mask) <= 1) continue;
          std::vector<int> s;
          for (int i = 0; i < n_bar; ++i)
            if (mask & (1u << i)) s.push_back(group[i]);
          subsets.push_back(std::move(s));
        }
      } else {
        subsets.push_back(group);
      }
    }

    const GradientEstimate* grad_b = gradient_at(gradients, kb, fn);
    ValueInterval best;
    for (const auto& subset : subsets) {
      const int n_rep = static_cast<int>(subset.size());
      const Band w = noise_band(noise, fn, cost_exp, n_rep);
      double mean = 0.0, lo_corr = 0.0, hi_corr = 0.0;
      for (int t : subset) {
        const Measurement& mt = history.record(t);
        mean += *record_value(mt, fn);
        const double dtau = mt.time - base.time;
        const Region region = two_record_region(base, mt);
        const Band ktau = local_constants(lip, fn, region).dtau;
        const bool eta_c = structure.local(fn, /*convexity=*/false, region).eta;
        const bool eta_v = structure.local(fn, /*convexity=*/true, region).eta;
        lo_corr += time_term(eta_c, grad_b, ktau, dtau, /*upper=*/true);
        hi_corr += time_term(eta_v, grad_b, ktau, dtau, /*upper=*/false);
      }
      mean /= n_rep;
      const double lo = mean - lo_corr / n_rep - w.hi;
      const double hi = mean - hi_corr / n_rep - w.lo;
      best.lo = std::max(best.lo, lo);
      best.hi = std::min(best.hi, hi);
    }
    (*intervals)[kb] = best;
  }

  // Phase 2: iterate the Lipschitz chain refinement until the best per-sweep
  // improvement falls to delta_r_min. Bounds only ever narrow.
  const int n = spec.n_u;
  for (diag.sweeps = 0; diag.sweeps < cfg.sweep_cap; ++diag.sweeps) {
    double delta_r = 0.0;
    for (int kb = 0; kb < count; ++kb) {
      ValueInterval& target = (*intervals)[kb];
      const Measurement& base = history.record(kb);
      for (int t = 0; t < count; ++t) {
        if (t == kb) continue;
        const ValueInterval& source = (*intervals)[t];
        const Measurement& mt = history.record(t);
        const GradientEstimate* grad_t = gradient_at(gradients, t, fn);
        const Region region = two_record_region(base, mt);
        const FnConstants local = local_constants(lip, fn, region);
        const double dtau = base.time - mt.time;

        if (source.hi < kInf) {
          const IndexSetFlag conc = structure.local(fn, /*convexity=*/false, region);
          double up = source.hi +
                      time_term(conc.eta, grad_t, local.dtau, dtau, /*upper=*/true);
          for (int i = 0; i < n; ++i) {
            const double du = base.u(i) - mt.u(i);
            if (grad_t && conc.contains(i))
              up += band_max(Band{grad_t->lower(i), grad_t->upper(i)}, du);
            else
              up += band_max(Band{local.du_lo(i), local.du_hi(i)}, du);
          }
          // Mutually contradictory inputs (invalid constants or boxes) could
          // otherwise drive the bounds past each other without end.
          up = std::max(up, target.lo);
          if (up < target.hi) {
            delta_r = std::max(delta_r, target.hi - up);
            target.hi = up;
          }
        }
        if (source.lo > -kInf) {
          const IndexSetFlag conv = structure.local(fn, /*convexity=*/true, region);
          double dn = source.lo +
                      time_term(conv.eta, grad_t, local.dtau, dtau, /*upper=*/false);
          for (int i = 0; i < n; ++i) {
            const double du = base.u(i) - mt.u(i);
            if (grad_t && conv.contains(i))
              dn += band_min(Band{grad_t->lower(i), grad_t->upper(i)}, du);
            else
              dn += band_min(Band{local.du_lo(i), local.du_hi(i)}, du);
          }
          dn = std::min(dn, target.hi);
          if (dn > target.lo) {
            delta_r = std::max(delta_r, dn - target.lo);
            target.lo = dn;
          }
        }
      }
    }
    diag.last_delta = delta_r;
    if (delta_r <= cfg.delta_r_min) {
      ++diag.sweeps;
      break;
    }
  }
  return diag;
}

}  // namespace scfo
