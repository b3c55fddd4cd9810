// Copyright 2026 The dpacct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPACCT_BUDGET_HPP_
#define DPACCT_BUDGET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpacct/budget_types.hpp"
#include "dpacct/discretization.hpp"
#include "dpacct/errors.hpp"
#include "dpacct/normal.hpp"
#include "dpacct/prv.hpp"

namespace dpacct {

// h = eps_error / sqrt((k/2) ln(12/delta_error)).
inline double mesh_size(std::int64_t k, double eps_error, double delta_error) {
  if (k < 1) throw ValidationError("mesh_size: k must be positive");
  if (!(eps_error > 0.0) || !std::isfinite(eps_error)) {
    throw ValidationError("mesh_size: eps_error must be positive");
  }
  if (!(delta_error > 0.0) || delta_error >= 1.0) {
    throw ValidationError("mesh_size: delta_error must lie in (0, 1)");
  }
  return eps_error /
         std::sqrt(0.5 * static_cast<double>(k) * std::log(12.0 / delta_error));
}

// L0 = 2 + max(eps_error + eps_upper_total, eps_upper_each), rounded up to
// the smallest lattice point mesh/2 + n*mesh (n >= 1) at or above it.
// Rounding up is always safe: a larger window only shrinks the dropped tail.
inline double truncation_bound(double eps_upper_total, double eps_upper_each,
                               double eps_error, double mesh) {
  if (!std::isfinite(eps_upper_total) || !std::isfinite(eps_upper_each)) {
    throw ValidationError("truncation_bound: epsilon upper bounds must be finite");
  }
  if (!(eps_error > 0.0) || !(mesh > 0.0)) {
    throw ValidationError("truncation_bound: eps_error and mesh must be positive");
  }
  const double l0 =
      2.0 + std::max(eps_error + eps_upper_total, eps_upper_each);
  std::int64_t n = static_cast<std::int64_t>(std::ceil((l0 - 0.5 * mesh) / mesh));
  if (n < 1) n = 1;
  double half_width = (static_cast<double>(n) + 0.5) * mesh;
  while (half_width < l0) {
    ++n;
    half_width = (static_cast<double>(n) + 0.5) * mesh;
  }
  return half_width;
}

// Advanced composition: an (eps, delta)-DP mechanism composed k times is
// (eps', k delta + delta')-DP with
//   eps' = eps sqrt(2k ln(1/delta')) + k eps (e^eps - 1).
inline double advanced_composition_eps(double eps, std::int64_t k,
                                       double delta_prime) {
  if (!(eps > 0.0)) {
    throw ValidationError("advanced_composition_eps: eps must be positive");
  }
  if (k < 1) {
    throw ValidationError("advanced_composition_eps: k must be positive");
  }
  if (!(delta_prime > 0.0) || delta_prime >= 1.0) {
    throw ValidationError(
        "advanced_composition_eps: delta_prime must lie in (0, 1)");
  }
  const double kd = static_cast<double>(k);
  return eps * std::sqrt(2.0 * kd * std::log(1.0 / delta_prime)) +
         kd * eps * std::expm1(eps);
}

// Tail bound for the PRVs of an (eps, delta)-DP mechanism:
//   Pr[|Y| >= eps + t] <= delta (1 + e^{-eps-t}) / (1 - e^{-t}),
// capped at 1.
inline double prv_tail_bound(double eps, double delta, double t) {
  if (!(t > 0.0)) {
    throw ValidationError("prv_tail_bound: t must be positive (bound diverges)");
  }
  if (!(eps >= 0.0) || !(delta >= 0.0) || delta > 1.0) {
    throw ValidationError("prv_tail_bound: need eps >= 0 and delta in [0, 1]");
  }
  const double bound =
      delta * (1.0 + std::exp(-eps - t)) / (-std::expm1(-t));
  return std::min(1.0, bound);
}

// Closed-form curve of the Gaussian mechanism,
//   delta(eps) = Phi(-eps/mu + mu/2) - e^eps Phi(-eps/mu - mu/2),
// clamped to [0, 1].  For a k-fold composition pass mu = sqrt(k)/sigma.
inline double analytic_gaussian_delta(double mu, double eps) {
  if (!(mu > 0.0)) {
    throw ValidationError("analytic_gaussian_delta: mu must be positive");
  }
  const long double a = -static_cast<long double>(eps) / mu + 0.5L * mu;
  const long double b = -static_cast<long double>(eps) / mu - 0.5L * mu;
  const long double d = std_normal_cdf_l(a) -
                        expl(static_cast<long double>(eps)) * std_normal_cdf_l(b);
  if (d <= 0.0L) return 0.0;
  if (d >= 1.0L) return 1.0;
  return static_cast<double>(d);
}

// ---------------------------------------------------------------------------
// Deriving the truncation window
// ---------------------------------------------------------------------------

struct WeightedMechanism {
  MechanismPrv prv;
  std::int64_t count = 1;
};

struct BudgetResult {
  ErrorBudget budget;
  double eps_upper_each = 0.0;
  double eps_upper_adv = std::numeric_limits<double>::infinity();
  double eps_upper_mgf = std::numeric_limits<double>::infinity();
  double eps_upper_total = 0.0;
  std::string route;     // "advanced-composition", "mgf" or "override"
  double wrap_bound = std::numeric_limits<double>::quiet_NaN();
};

namespace internal {

// log E[e^{sign * lambda * Y~}] summed over all compositions, evaluated from
// the discretized PMFs.  Log-sum-exp keeps the exponents nonpositive.  The
// PMFs here carry no mean-matching shift; each composition instead gets the
// worst-case allowance lambda*h/2, which dominates any |shift| <= h/2.
inline double log_mgf_sum(
    const std::vector<std::pair<DiscretePrv, std::int64_t>>& items, int sign,
    double lambda) {
  long double total = 0.0L;
  for (const auto& [prv, count] : items) {
    const std::int64_t half = prv.n();
    std::int64_t j_lo = -half, j_hi = half;
    while (j_lo < half &&
           prv.probs[static_cast<std::size_t>(j_lo + half)] <= 0.0) {
      ++j_lo;
    }
    while (j_hi > j_lo &&
           prv.probs[static_cast<std::size_t>(j_hi + half)] <= 0.0) {
      --j_hi;
    }
    const long double y_peak =
        static_cast<long double>(sign > 0 ? j_hi : -j_lo) * prv.mesh;
    long double acc = 0.0L;
    for (std::int64_t j = j_lo; j <= j_hi; ++j) {
      const double q = prv.probs[static_cast<std::size_t>(j + half)];
      if (q <= 0.0) continue;
      const long double y = sign * static_cast<long double>(j) * prv.mesh;
      acc += q * expl(lambda * (y - y_peak));
    }
    total += count * (lambda * (y_peak + 0.5L * prv.mesh) + logl(acc));
  }
  return static_cast<double>(total);
}

// Minimizes f over lambda > 0: coarse geometric scan plus golden-section
// refinement around the best point.  Any lambda yields a valid Chernoff
// bound, so the search only affects tightness, never soundness.
template <typename F>
inline double minimize_over_lambda(F f) {
  double best_lambda = 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (int e = -20; e <= 14; ++e) {
    const double lambda = std::ldexp(1.0, e);
    const double v = f(lambda);
    if (v < best) {
      best = v;
      best_lambda = lambda;
    }
  }
  double lo = best_lambda * 0.5, hi = best_lambda * 2.0;
  const double phi = 0.6180339887498949;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 40; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({best, f1, f2});
}

// Smallest t with the one-sided Chernoff bound <= tail:
// min over lambda of (logMGF(lambda) + ln(1/tail)) / lambda.
inline double chernoff_quantile(
    const std::vector<std::pair<DiscretePrv, std::int64_t>>& items, int sign,
    double tail) {
  const double log_inv_tail = std::log(1.0 / tail);
  return minimize_over_lambda([&](double lambda) {
    return (log_mgf_sum(items, sign, lambda) + log_inv_tail) / lambda;
  });
}

// Two-sided bound on Pr[|sum of Y~| >= threshold].
inline double chernoff_wrap_bound(
    const std::vector<std::pair<DiscretePrv, std::int64_t>>& items,
    double threshold) {
  double bound = 0.0;
  for (int sign : {+1, -1}) {
    const double log_b = minimize_over_lambda([&](double lambda) {
      return log_mgf_sum(items, sign, lambda) - lambda * threshold;
    });
    bound += std::min(1.0, std::exp(log_b));
  }
  return std::min(1.0, bound);
}

// Finite-part probability outside (-L, L], normalized to the finite part.
inline double conditional_outside_mass(const MechanismPrv& prv, double L) {
  const long double finite = 1.0L - static_cast<long double>(prv.mass_y_inf);
  if (finite <= 0.0L) return 0.0;
  const long double inside = static_cast<long double>(prv.cdf_y(L)) -
                             static_cast<long double>(prv.cdf_y(-L));
  const long double out = (finite - inside) / finite;
  return std::max(0.0, static_cast<double>(out));
}

}  // namespace internal

// Derives (h, L) for composing the given mechanisms under the accuracy
// targets.
//
// h is the closed-form mesh.  For L, two upper bounds on the composed
// epsilon at delta_error/4 are computed and the smaller wins:
//
//  * advanced composition fed with each mechanism's eps at delta_error/(8k)
//    (obtained by inverting its exact single curve), the default oracle;
//  * a Chernoff quantile of the k-fold sum evaluated from the discretized
//    single-mechanism moment generating functions, which stays tight for
//    subsampled mechanisms where advanced composition is vacuous.
//
// Either bound feeds L = 2 + max(eps_error + eps_upper, eps_each) rounded up
// to the lattice.  The window is then verified directly: the summed exact
// single-mechanism tails outside (-L, L] must stay within delta_error/6 and
// the Chernoff bound on wrap-around within 2/3 delta_error, matching the
// split that backs the query-time sandwich; L grows until both hold.
// An explicit eps_upper_override skips the oracles and is honored as given.
inline BudgetResult derive_budget(
    const std::vector<WeightedMechanism>& mechanisms, double eps_error,
    double delta_error,
    std::optional<double> eps_upper_override = std::nullopt) {
  if (mechanisms.empty()) {
    throw ValidationError("derive_budget: no mechanisms given");
  }
  if (!(eps_error > 0.0) || !std::isfinite(eps_error)) {
    throw ValidationError("derive_budget: eps_error must be positive");
  }
  if (delta_error < kDeltaFloor) {
    throw PrecisionFloorError("derive_budget: delta_error below the 1e-10 floor");
  }
  if (!(delta_error < 1.0)) {
    throw ValidationError("derive_budget: delta_error must be below 1");
  }
  std::int64_t k = 0;
  for (const auto& wm : mechanisms) {
    if (wm.count < 1) {
      throw ValidationError("derive_budget: counts must be positive");
    }
    k += wm.count;
  }

  BudgetResult result;
  result.budget.eps_error = eps_error;
  result.budget.delta_error = delta_error;
  result.budget.k = k;
  const double h = mesh_size(k, eps_error, delta_error);
  result.budget.mesh = h;

  // Per-mechanism epsilon at delta_error/(8k) from the exact curves.
  const double delta_each = delta_error / (8.0 * static_cast<double>(k));
  double eps_each = 0.0;
  std::vector<double> eps_i(mechanisms.size());
  for (std::size_t i = 0; i < mechanisms.size(); ++i) {
    eps_i[i] = mechanism_epsilon(mechanisms[i].prv, delta_each);
    eps_each = std::max(eps_each, eps_i[i]);
  }
  result.eps_upper_each = eps_each;

  // Window-search discretizations skip the mean-matching quadrature; the
  // shift allowance inside log_mgf_sum keeps the bounds valid regardless.
  auto discretize_all = [&mechanisms](double h_, double L_) {
    std::vector<std::pair<DiscretePrv, std::int64_t>> items;
    items.reserve(mechanisms.size());
    for (const auto& wm : mechanisms) {
      items.emplace_back(internal::discretize_impl(wm.prv, h_, L_, false),
                         wm.count);
    }
    return items;
  };

  if (eps_upper_override.has_value()) {
    result.eps_upper_total = *eps_upper_override;
    result.route = "override";
    result.budget.half_width =
        truncation_bound(result.eps_upper_total, eps_each, eps_error, h);
    result.wrap_bound = internal::chernoff_wrap_bound(
        discretize_all(h, result.budget.half_width), result.budget.half_width);
    return result;
  }

  // Route 1: advanced composition across groups, with the per-group failure
  // budgets delta' summing to delta_error/8 so that the composed guarantee
  // holds at delta_error/4.
  double adv_total = 0.0;
  for (std::size_t i = 0; i < mechanisms.size(); ++i) {
    const double frac = static_cast<double>(mechanisms[i].count) /
                        static_cast<double>(k);
    adv_total += advanced_composition_eps(std::max(eps_i[i], 1e-12),
                                          mechanisms[i].count,
                                          (delta_error / 8.0) * frac);
  }
  result.eps_upper_adv = adv_total;

  // Route 2: Chernoff quantile of the discretized sum at delta_error/4,
  // two-sided.  The quantile depends (mildly) on the trial window the PMFs
  // were discretized on, so grow the trial window until it covers the
  // answer.
  double trial_L =
      truncation_bound(std::min(adv_total, eps_each), eps_each, eps_error, h);
  double mgf_total = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 60; ++iter) {
    const auto items = discretize_all(h, trial_L);
    double q = 0.0;
    for (int sign : {+1, -1}) {
      q = std::max(q,
                   internal::chernoff_quantile(items, sign, delta_error / 8.0));
    }
    mgf_total = q;
    const double implied_L = truncation_bound(q, eps_each, eps_error, h);
    if (implied_L <= trial_L) break;
    trial_L = implied_L;
  }
  result.eps_upper_mgf = mgf_total;

  if (adv_total <= mgf_total) {
    result.eps_upper_total = adv_total;
    result.route = "advanced-composition";
  } else {
    result.eps_upper_total = mgf_total;
    result.route = "mgf";
  }

  double L = truncation_bound(result.eps_upper_total, eps_each, eps_error, h);

  // Direct verification of the window against the error split.
  for (int iter = 0;; ++iter) {
    long double tail_sum = 0.0L;
    for (const auto& wm : mechanisms) {
      tail_sum += static_cast<long double>(wm.count) *
                  internal::conditional_outside_mass(wm.prv, L);
    }
    const auto items = discretize_all(h, L);
    const double wrap = internal::chernoff_wrap_bound(items, L);
    if (tail_sum <= delta_error / 6.0 && wrap <= 2.0 * delta_error / 3.0) {
      result.wrap_bound = wrap;
      break;
    }
    if (iter >= 200) {
      throw NumericalGuardError(
          "derive_budget: could not verify a truncation window; the "
          "mechanisms' tails are too heavy for the requested accuracy");
    }
    L = truncation_bound((L * 1.25 - 2.0) - eps_error, eps_each, eps_error, h);
  }
  result.budget.half_width = L;
  return result;
}

}  // namespace dpacct

#endif  // DPACCT_BUDGET_HPP_
