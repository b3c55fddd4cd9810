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

#ifndef DPACCT_COMPOSITION_HPP_
#define DPACCT_COMPOSITION_HPP_

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dpacct/budget_types.hpp"
#include "dpacct/discretization.hpp"
#include "dpacct/errors.hpp"
#include "dpacct/fft.hpp"

namespace dpacct {

// Accumulated error bookkeeping for a composed distribution.  The three
// budget terms (dropped single-mechanism tails, wrap-around of the circular
// sum, and the Hoeffding term tied to the mesh) add up to the delta accuracy
// actually achieved; they are reported for diagnostics, while the query
// bounds use the full budgeted delta_error.
struct ErrorLedger {
  double sum_trunc_mass = 0.0;  // sum over compositions of trunc_mass
  double clamped_mass = 0.0;    // negative FFT output clamped away
  double eta0 = 0.0;            // Hoeffding budget, delta_error/6
  double wrap_bound = std::numeric_limits<double>::quiet_NaN();
  double wrap_window_mass = std::numeric_limits<double>::quiet_NaN();
  bool wrap_flagged = false;
};

// Two-sided bracket around a delta query.
struct DeltaEstimate {
  double lower = 0.0;
  double estimate = 0.0;
  double upper = 0.0;
};

// Sandwich around an epsilon query.  Fields may be +infinity when the target
// delta is unreachable inside the truncation window.
struct EpsEstimate {
  double lower = 0.0;
  double estimate = 0.0;
  double upper = 0.0;
  std::string diagnostic;
};

// Distribution of the circular sum Y_1 (+)_L ... (+)_L Y_k of discretized
// PRVs.  probs[i + n] is the mass at lattice value i*h + total_shift; the
// residual shift lies in (-h/2, h/2] after whole-bin carries are folded into
// the indices (sound because 2L is an exact multiple of h).  Suffix sums of
// p_j and p_j e^{-y_j} are precomputed so each delta query costs O(1).
// Instances are immutable after construction and safe to query concurrently.
class ComposedPrv {
 public:
  double mesh = 0.0;
  double half_width = 0.0;
  std::vector<double> probs;
  double total_shift = 0.0;
  double q_finite = 1.0;
  ErrorLedger ledger;

  std::int64_t n() const {
    return (static_cast<std::int64_t>(probs.size()) - 1) / 2;
  }
  double value_at(std::int64_t index) const { return index * mesh + total_shift; }

  // E[(1 - e^{eps - Y})_+] over the lattice distribution.
  double delta_tilde(double eps) const {
    const std::int64_t half = n();
    // first lattice index with value strictly above eps
    std::int64_t j = static_cast<std::int64_t>(
                         std::floor((eps - total_shift) / mesh)) + 1;
    if (j > half) return 0.0;
    if (j < -half) j = -half;
    const std::size_t s = static_cast<std::size_t>(j + half);
    const long double d =
        suffix_p_[s] - expl(static_cast<long double>(eps)) * suffix_pe_[s];
    if (d <= 0.0L) return 0.0;
    if (d >= 1.0L) return 1.0;
    return static_cast<double>(d);
  }

  // Mass at lattice values strictly above x (used for wrap diagnostics).
  double mass_above(double x) const {
    const std::int64_t half = n();
    std::int64_t j =
        static_cast<std::int64_t>(std::floor((x - total_shift) / mesh)) + 1;
    if (j > half) return 0.0;
    if (j < -half) j = -half;
    return static_cast<double>(suffix_p_[static_cast<std::size_t>(j + half)]);
  }

  void finalize() {
    const std::size_t m = probs.size();
    suffix_p_.assign(m + 1, 0.0L);
    suffix_pe_.assign(m + 1, 0.0L);
    const std::int64_t half = n();
    for (std::size_t s = m; s-- > 0;) {
      const std::int64_t j = static_cast<std::int64_t>(s) - half;
      const long double y = static_cast<long double>(j) * mesh + total_shift;
      suffix_p_[s] = suffix_p_[s + 1] + probs[s];
      suffix_pe_[s] = suffix_pe_[s + 1] + probs[s] * expl(-y);
    }
  }

 private:
  std::vector<long double> suffix_p_;
  std::vector<long double> suffix_pe_;
};

namespace internal {

// Splits a value shift into whole-bin carry plus a residual in (-h/2, h/2].
inline std::int64_t reduce_shift(double shift, double mesh, double* residual) {
  std::int64_t carry = static_cast<std::int64_t>(std::llround(shift / mesh));
  double r = shift - static_cast<double>(carry) * mesh;
  while (r > 0.5 * mesh) {
    ++carry;
    r = shift - static_cast<double>(carry) * mesh;
  }
  while (r <= -0.5 * mesh) {
    --carry;
    r = shift - static_cast<double>(carry) * mesh;
  }
  *residual = r;
  return carry;
}

// probs[j] moves to index (j + carry) mod m.
inline void rotate_indices(std::vector<double>& probs, std::int64_t carry) {
  const std::int64_t m = static_cast<std::int64_t>(probs.size());
  std::int64_t offset = carry % m;
  if (offset < 0) offset += m;
  if (offset == 0) return;
  std::vector<double> out(probs.size());
  for (std::int64_t j = 0; j < m; ++j) {
    out[static_cast<std::size_t>((j + offset) % m)] =
        probs[static_cast<std::size_t>(j)];
  }
  probs.swap(out);
}

// Clamp tiny negative FFT output, renormalize to sum 1, and record how much
// was clamped.  More than 1e-8 of negative mass means the transform is no
// longer operating in its roundoff regime, so that is treated as fatal.
inline double clamp_and_normalize(std::vector<double>& probs) {
  long double neg = 0.0L;
  long double sum = 0.0L;
  for (double& q : probs) {
    if (q < 0.0) {
      neg -= q;
      q = 0.0;
    }
    sum += q;
  }
  if (neg > 1e-8L) {
    throw NumericalGuardError(
        "composition: FFT produced " + std::to_string(static_cast<double>(neg)) +
        " of negative mass, above the 1e-8 roundoff allowance");
  }
  if (!(sum > 0.0L)) {
    throw NumericalGuardError("composition: empty distribution after FFT");
  }
  const double inv = static_cast<double>(1.0L / sum);
  for (double& q : probs) q *= inv;
  return static_cast<double>(neg);
}

// z^k by binary exponentiation in extended precision.
inline std::complex<double> cpow_int(std::complex<double> z, std::int64_t k) {
  std::complex<long double> base(z.real(), z.imag());
  std::complex<long double> acc(1.0L, 0.0L);
  while (k > 0) {
    if (k & 1) acc *= base;
    base *= base;
    k >>= 1;
  }
  return {static_cast<double>(acc.real()), static_cast<double>(acc.imag())};
}

}  // namespace internal

// Lift a single discretized PRV into the composed representation.
inline ComposedPrv from_discrete(const DiscretePrv& a) {
  ComposedPrv c;
  c.mesh = a.mesh;
  c.half_width = a.half_width;
  c.probs = a.probs;
  double residual = 0.0;
  const std::int64_t carry = internal::reduce_shift(a.shift, a.mesh, &residual);
  internal::rotate_indices(c.probs, carry);
  c.total_shift = residual;
  c.q_finite = 1.0 - a.mass_inf;
  c.ledger.sum_trunc_mass = a.trunc_mass;
  c.finalize();
  return c;
}

// Product of powered spectra across distinct mechanisms, one inverse
// transform: the k-fold circular convolution at O(b (L/h) log(L/h)).
inline ComposedPrv compose(
    const std::vector<std::pair<DiscretePrv, std::int64_t>>& items,
    double eta0 = 0.0) {
  if (items.empty()) {
    throw ValidationError("compose: empty mechanism sequence");
  }
  const double mesh = items.front().first.mesh;
  const double half_width = items.front().first.half_width;
  const std::size_t m = items.front().first.probs.size();
  for (const auto& [prv, count] : items) {
    if (count < 1) throw ValidationError("compose: count must be positive");
    if (prv.mesh != mesh || prv.half_width != half_width ||
        prv.probs.size() != m) {
      throw ValidationError("compose: all items must share (mesh, half_width)");
    }
  }

  if (m > (std::size_t{1} << 24)) {
    throw NumericalGuardError(
        "compose: " + std::to_string(m) +
        " lattice points exceed the supported transform size; loosen the "
        "error targets or supply a tighter eps upper bound");
  }

  ComposedPrv c;
  c.mesh = mesh;
  c.half_width = half_width;

  const Dft dft(m);
  std::vector<std::complex<double>> acc;
  long double shift_sum = 0.0L;
  long double q_finite = 1.0L;
  long double trunc_sum = 0.0L;
  std::int64_t total_count = 0;
  for (const auto& [prv, count] : items) {
    std::vector<std::complex<double>> spec = dft.forward(prv.probs);
    for (auto& z : spec) z = internal::cpow_int(z, count);
    if (acc.empty()) {
      acc = std::move(spec);
    } else {
      for (std::size_t i = 0; i < m; ++i) acc[i] *= spec[i];
    }
    shift_sum += static_cast<long double>(count) * prv.shift;
    q_finite *= powl(1.0L - static_cast<long double>(prv.mass_inf), count);
    trunc_sum += static_cast<long double>(count) * prv.trunc_mass;
    total_count += count;
  }
  c.probs = dft.inverse_real(acc);
  c.ledger.clamped_mass = internal::clamp_and_normalize(c.probs);
  c.ledger.sum_trunc_mass = static_cast<double>(trunc_sum);
  c.ledger.eta0 = eta0;

  double residual = 0.0;
  const std::int64_t carry = internal::reduce_shift(
      static_cast<double>(shift_sum), mesh, &residual);
  // Storage index s holds lattice index s - n, so summing K storage indices
  // overshoots the lattice origin by (K-1)*n slots; undo that here.
  const std::int64_t half = (static_cast<std::int64_t>(m) - 1) / 2;
  internal::rotate_indices(c.probs,
                           carry - ((total_count - 1) % static_cast<std::int64_t>(m)) * half);
  c.total_shift = residual;
  c.q_finite = static_cast<double>(q_finite);
  c.finalize();
  return c;
}

inline ComposedPrv self_compose(const DiscretePrv& a, std::int64_t count) {
  return compose({{a, count}});
}

// Circular convolution of two already-composed distributions.
inline ComposedPrv circular_convolve(const ComposedPrv& a, const ComposedPrv& b) {
  if (a.mesh != b.mesh || a.half_width != b.half_width ||
      a.probs.size() != b.probs.size()) {
    throw ValidationError(
        "circular_convolve: operands must share (mesh, half_width)");
  }
  ComposedPrv c;
  c.mesh = a.mesh;
  c.half_width = a.half_width;

  const Dft dft(a.probs.size());
  std::vector<std::complex<double>> sa = dft.forward(a.probs);
  const std::vector<std::complex<double>> sb = dft.forward(b.probs);
  for (std::size_t i = 0; i < sa.size(); ++i) sa[i] *= sb[i];
  c.probs = dft.inverse_real(sa);
  c.ledger.clamped_mass = internal::clamp_and_normalize(c.probs) +
                          a.ledger.clamped_mass + b.ledger.clamped_mass;
  c.ledger.sum_trunc_mass = a.ledger.sum_trunc_mass + b.ledger.sum_trunc_mass;
  c.ledger.eta0 = std::max(a.ledger.eta0, b.ledger.eta0);

  double residual = 0.0;
  const std::int64_t carry = internal::reduce_shift(
      a.total_shift + b.total_shift, a.mesh, &residual);
  // one extra convolution factor: undo the n-slot storage-origin overshoot
  internal::rotate_indices(c.probs, carry - c.n());
  c.total_shift = residual;
  c.q_finite = a.q_finite * b.q_finite;
  c.finalize();
  return c;
}

inline ComposedPrv circular_convolve(const DiscretePrv& a, const DiscretePrv& b) {
  return circular_convolve(from_discrete(a), from_discrete(b));
}

// ---------------------------------------------------------------------------
// Queries under an error budget
// ---------------------------------------------------------------------------

namespace internal {

inline double fold_infinity_mass(double q_finite, double delta_finite) {
  const long double v = (1.0L - static_cast<long double>(q_finite)) +
                        static_cast<long double>(q_finite) * delta_finite;
  return static_cast<double>(v);
}

}  // namespace internal

// delta(eps) with the certified sandwich:
//   estimate = fold(delta_tilde(eps))
//   upper    = fold(delta_tilde(eps - eps_error) + delta_error)
//   lower    = max(0, fold(delta_tilde(eps + eps_error) - delta_error))
// where fold(x) = (1 - q_finite) + q_finite * x folds the infinity mass in.
inline DeltaEstimate delta_at(const ComposedPrv& c, double eps,
                              const ErrorBudget& budget) {
  const double window = c.half_width - budget.eps_error;
  if (!(eps >= 0.0) || !(eps <= window)) {
    throw ValidationError("delta_at: eps must lie in [0, " +
                          std::to_string(window) +
                          "] (half_width minus eps_error)");
  }
  DeltaEstimate out;
  out.estimate =
      std::min(1.0, internal::fold_infinity_mass(c.q_finite, c.delta_tilde(eps)));
  out.upper = std::min(
      1.0, internal::fold_infinity_mass(
               c.q_finite,
               c.delta_tilde(eps - budget.eps_error) + budget.delta_error));
  out.lower = std::max(
      0.0, internal::fold_infinity_mass(
               c.q_finite,
               c.delta_tilde(eps + budget.eps_error) - budget.delta_error));
  return out;
}

// Monotone inversion of the three delta curves.  The upper eps comes from
// the upper delta curve and vice versa: a point where the upper curve is
// already below the target certifies the target, so its crossing bounds the
// true eps from above.  Bisection stops at a 1e-6 bracket or 60 iterations.
inline EpsEstimate epsilon_at(const ComposedPrv& c, double delta_target,
                              const ErrorBudget& budget) {
  if (!(delta_target >= kDeltaFloor)) {
    throw PrecisionFloorError(
        "epsilon_at: delta targets below 1e-10 are inside floating-point "
        "noise and are not supported");
  }
  if (!(delta_target < 1.0)) {
    throw ValidationError("epsilon_at: delta target must be below 1");
  }
  const double window = c.half_width - budget.eps_error;

  auto invert = [&](auto curve, const char* name, EpsEstimate& est,
                    double& slot) {
    if (curve(window) > delta_target) {
      slot = std::numeric_limits<double>::infinity();
      est.diagnostic += std::string(name) +
                        " delta curve stays above the target inside the "
                        "truncation window; ";
      return;
    }
    if (curve(0.0) <= delta_target) {
      slot = 0.0;
      return;
    }
    double lo = 0.0, hi = window;
    for (int i = 0; i < 60 && hi - lo > 1e-6; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (curve(mid) > delta_target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    slot = hi;
  };

  EpsEstimate out;
  invert([&](double e) { return delta_at(c, e, budget).upper; }, "upper", out,
         out.upper);
  invert([&](double e) { return delta_at(c, e, budget).estimate; }, "estimate",
         out, out.estimate);
  invert([&](double e) { return delta_at(c, e, budget).lower; }, "lower", out,
         out.lower);
  return out;
}

// Wrap-around diagnostic: with a budget-conforming L the composed mass in
// (L - eps_error, L] should stay below delta_error.  Flagged, not fatal.
inline void record_wrap_diagnostic(ComposedPrv& c, const ErrorBudget& budget) {
  c.ledger.wrap_window_mass =
      c.mass_above(c.half_width - budget.eps_error);
  c.ledger.wrap_flagged = c.ledger.wrap_window_mass > budget.delta_error;
}

}  // namespace dpacct

#endif  // DPACCT_COMPOSITION_HPP_
