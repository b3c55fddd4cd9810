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

#ifndef DPACCT_PRV_HPP_
#define DPACCT_PRV_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>

#include "dpacct/errors.hpp"
#include "dpacct/normal.hpp"
#include "dpacct/quadrature.hpp"

namespace dpacct {

// A privacy loss random variable pair (X, Y) for one privacy curve
// delta(P||Q).  Y is the log likelihood ratio log(Q/P) under Q, X the same
// under P, so that Y(t) = e^t X(t) pointwise and
// delta(eps) = Pr[Y > eps] - e^eps Pr[X > eps].
//
// The CDFs describe only the finite part; point masses at +inf (for Y) and
// -inf (for X) are carried separately.  CDFs are right-continuous and may
// have atoms.  Values are immutable after construction and all operations
// here are pure, so sharing across threads is safe.
struct MechanismPrv {
  std::function<double(double)> cdf_y;
  std::function<double(double)> cdf_x;
  double mass_y_inf = 0.0;
  double mass_x_neg_inf = 0.0;
  // Optional closed form for E[Y | a < Y <= b]; unset means the quadrature
  // path in conditional_mean is used.
  std::function<double(double, double)> truncated_mean_y;
};

struct SubsampleParams {
  double p = 1.0;  // sampling probability, in (0, 1]
};

// ---------------------------------------------------------------------------
// Standard mechanisms
// ---------------------------------------------------------------------------

// Gaussian mechanism with the given noise scale and sensitivity:
// Y = N(mu^2/2, mu^2), X = N(-mu^2/2, mu^2) with mu = sensitivity/noise_scale.
// Zero sensitivity degenerates to a point mass at 0.
inline MechanismPrv gaussian_prv(double noise_scale, double sensitivity = 1.0) {
  if (!(noise_scale > 0.0) || !std::isfinite(noise_scale)) {
    throw ValidationError("gaussian_prv: noise_scale must be positive");
  }
  if (!(sensitivity >= 0.0) || !std::isfinite(sensitivity)) {
    throw ValidationError("gaussian_prv: sensitivity must be nonnegative");
  }
  MechanismPrv prv;
  if (sensitivity == 0.0) {
    auto step = [](double t) { return t < 0.0 ? 0.0 : 1.0; };
    prv.cdf_y = step;
    prv.cdf_x = step;
    prv.truncated_mean_y = [](double a, double b) {
      if (a < 0.0 && 0.0 <= b) return 0.0;
      throw ValidationError("gaussian_prv: window excludes the point mass");
    };
    return prv;
  }
  const double mu = sensitivity / noise_scale;
  const double mean = 0.5 * mu * mu;
  prv.cdf_y = [mu, mean](double t) { return std_normal_cdf((t - mean) / mu); };
  prv.cdf_x = [mu, mean](double t) { return std_normal_cdf((t + mean) / mu); };
  prv.truncated_mean_y = [mu, mean](double a, double b) {
    return truncated_normal_conditional_mean(mean, mu, a, b);
  };
  return prv;
}

// Laplace mechanism with shift mu: Y = |Z - mu| - |Z|, Z ~ Lap(0,1).
// Y has an atom of mass e^{-mu}/2 at -mu, an atom of mass 1/2 at +mu, and
// density e^{(t-mu)/2}/4 in between; X is the mirror image.
inline MechanismPrv laplace_prv(double shift) {
  if (!(shift > 0.0) || !std::isfinite(shift)) {
    throw ValidationError("laplace_prv: shift must be positive");
  }
  const double mu = shift;
  MechanismPrv prv;
  prv.cdf_y = [mu](double t) {
    if (t < -mu) return 0.0;
    if (t >= mu) return 1.0;
    return 0.5 * std::exp(-0.5 * (mu - t));
  };
  prv.cdf_x = [mu](double t) {
    if (t < -mu) return 0.0;
    if (t >= mu) return 1.0;
    return 1.0 - 0.5 * std::exp(-0.5 * (mu + t));
  };
  prv.truncated_mean_y = [mu](double a, double b) {
    long double num = 0.0L;
    long double mass = 0.0L;
    const long double atom_lo = 0.5L * expl(-(long double)mu);
    if (a < -mu && -mu <= b) {
      num += -mu * atom_lo;
      mass += atom_lo;
    }
    if (a < mu && mu <= b) {
      num += 0.5L * mu;
      mass += 0.5L;
    }
    const double lo = std::max(a, -mu);
    const double hi = std::min(b, mu);
    if (hi > lo) {
      // integral of t * e^{(t-mu)/2}/4; antiderivative (t-2) e^{(t-mu)/2}/2
      auto anti = [mu](long double t) {
        return 0.5L * (t - 2.0L) * expl(0.5L * (t - mu));
      };
      num += anti(hi) - anti(lo);
      auto cdf_cont = [mu](long double t) {
        return 0.5L * expl(-0.5L * (mu - t));
      };
      mass += cdf_cont(hi) - cdf_cont(lo);
    }
    if (!(mass > 0.0L)) {
      throw ValidationError("laplace_prv: zero mass in truncation window");
    }
    return static_cast<double>(num / mass);
  };
  return prv;
}

// PRVs of an (eps, delta)-DP guarantee.  Y takes the values -eps, +eps and
// +inf with probabilities (1-delta)/(e^eps+1), (1-delta)e^eps/(e^eps+1) and
// delta; X mirrors with its infinity mass at -inf.
inline MechanismPrv approx_dp_prv(double eps, double delta) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw ValidationError("approx_dp_prv: eps must be nonnegative and finite");
  }
  if (!(delta >= 0.0) || delta >= 1.0) {
    throw ValidationError("approx_dp_prv: delta must lie in [0, 1)");
  }
  const double p_minus = (1.0 - delta) / (std::exp(eps) + 1.0);
  const double p_plus = (1.0 - delta) - p_minus;  // (1-delta) e^eps/(e^eps+1)
  MechanismPrv prv;
  prv.mass_y_inf = delta;
  prv.mass_x_neg_inf = delta;
  prv.cdf_y = [eps, p_minus, p_plus](double t) {
    if (t < -eps) return 0.0;
    if (t < eps) return p_minus;
    return p_minus + p_plus;
  };
  prv.cdf_x = [eps, p_minus, p_plus](double t) {
    if (t < -eps) return 0.0;
    if (t < eps) return p_plus;
    return p_plus + p_minus;
  };
  prv.truncated_mean_y = [eps, p_minus, p_plus](double a, double b) {
    long double num = 0.0L;
    long double mass = 0.0L;
    if (a < -eps && -eps <= b) {
      num += -static_cast<long double>(eps) * p_minus;
      mass += p_minus;
    }
    if (a < eps && eps <= b) {
      num += static_cast<long double>(eps) * p_plus;
      mass += p_plus;
    }
    if (!(mass > 0.0L)) {
      throw ValidationError("approx_dp_prv: zero mass in truncation window");
    }
    return static_cast<double>(num / mass);
  };
  return prv;
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

namespace internal {

// log((e^t - (1-p))/p) without cancellation near t = log(1-p) and without
// overflowing exp for large t.
inline double subsample_arg(double t, double p, double log1m_p) {
  const double d = t - log1m_p;
  if (d <= 0.0) return -std::numeric_limits<double>::infinity();
  const double log_ratio = log1m_p - std::log(p);  // log((1-p)/p)
  if (d < 30.0) return log_ratio + std::log(std::expm1(d));
  return log_ratio + d + std::log1p(-std::exp(-d));
}

}  // namespace internal

// PRVs of the subsampled curve delta(P || p*P + (1-p)*Q) given the PRVs of
// delta(P||Q).  Requires an inner pair without infinity mass, since the
// change of variables assumes finite X and Y.
inline MechanismPrv subsample_prv(const MechanismPrv& inner,
                                  SubsampleParams params) {
  const double p = params.p;
  if (!(p > 0.0) || p > 1.0) {
    throw ValidationError("subsample_prv: sampling probability must be in (0, 1]");
  }
  if (inner.mass_y_inf != 0.0 || inner.mass_x_neg_inf != 0.0) {
    throw ValidationError(
        "subsample_prv: inner mechanism carries infinity mass; subsampling of "
        "(eps,delta)-DP PRVs with delta > 0 is not supported");
  }
  if (p == 1.0) return inner;  // g(t) = t

  const double log1m_p = std::log1p(-p);
  auto cdf_y_inner = inner.cdf_y;
  auto cdf_x_inner = inner.cdf_x;
  MechanismPrv prv;
  prv.cdf_x = [cdf_x_inner, p, log1m_p](double t) {
    if (t < log1m_p) return 0.0;
    return cdf_x_inner(internal::subsample_arg(t, p, log1m_p));
  };
  prv.cdf_y = [cdf_y_inner, cdf_x_inner, p, log1m_p](double t) {
    if (t < log1m_p) return 0.0;
    const double g = internal::subsample_arg(t, p, log1m_p);
    return p * cdf_y_inner(g) + (1.0 - p) * cdf_x_inner(g);
  };
  // truncated_mean_y intentionally unset: computed by quadrature downstream.
  return prv;
}

// PRVs of the reversed curve delta(Q||P): (X', Y') = (-Y, -X), with the
// infinity masses swapped.  At an atom of the source CDF the reflected CDF
// evaluates to its left limit; all built-in mechanisms keep their atoms in
// bin interiors, where this makes no difference to discretization.
inline MechanismPrv invert_direction(const MechanismPrv& prv) {
  const double total_y = 1.0 - prv.mass_y_inf;
  const double total_x = 1.0 - prv.mass_x_neg_inf;
  auto cdf_y = prv.cdf_y;
  auto cdf_x = prv.cdf_x;
  MechanismPrv out;
  out.cdf_y = [cdf_x, total_x](double t) { return total_x - cdf_x(-t); };
  out.cdf_x = [cdf_y, total_y](double t) { return total_y - cdf_y(-t); };
  out.mass_y_inf = prv.mass_x_neg_inf;
  out.mass_x_neg_inf = prv.mass_y_inf;
  return out;
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

// Finite-part mass of the window (-L, L].
inline double window_mass(const MechanismPrv& prv, double half_width) {
  return prv.cdf_y(half_width) - prv.cdf_y(-half_width);
}

// E[Y | -L < Y <= L].  Uses the analytic truncated mean when the mechanism
// provides one; otherwise integrates the CDF by parts,
//   E[Y 1{-L<Y<=L}] = L F(L) + L F(-L) - int_{-L}^{L} F(t) dt,
// with the adaptive trapezoid of quadrature.hpp.  refine scales the base
// node count (default 64).
inline double conditional_mean(const MechanismPrv& prv, double half_width,
                               int refine = 64) {
  if (!(half_width > 0.0)) {
    throw ValidationError("conditional_mean: half_width must be positive");
  }
  if (refine < 1) {
    throw ValidationError("conditional_mean: refine must be positive");
  }
  const double mass = window_mass(prv, half_width);
  if (!(mass > 0.0)) {
    throw ValidationError("conditional_mean: zero mass in (-L, L]");
  }
  if (prv.truncated_mean_y) {
    return prv.truncated_mean_y(-half_width, half_width);
  }
  const double L = half_width;
  const int base = std::min(refine * 64, 1 << 17);
  const double integral =
      integrate_adaptive(prv.cdf_y, -L, L, 1e-13, base);
  const long double num = static_cast<long double>(L) * prv.cdf_y(L) +
                          static_cast<long double>(L) * prv.cdf_y(-L) -
                          integral;
  return static_cast<double>(num / mass);
}

// delta(eps) of a single mechanism, straight from the CDFs:
// Pr[Y > eps] - e^eps Pr[X > eps].  The Y tail includes the infinity mass.
inline double mechanism_delta(const MechanismPrv& prv, double eps) {
  const long double tail_y = 1.0L - static_cast<long double>(prv.cdf_y(eps));
  const long double tail_x = (1.0L - static_cast<long double>(prv.mass_x_neg_inf)) -
                             static_cast<long double>(prv.cdf_x(eps));
  const long double d = tail_y - expl(static_cast<long double>(eps)) * tail_x;
  if (d < 0.0L) return 0.0;
  if (d > 1.0L) return 1.0;
  return static_cast<double>(d);
}

// Same curve restricted to the finite part of Y (the infinity mass factored
// out).  Used to size the truncation window, where only finite values count.
inline double mechanism_delta_conditional(const MechanismPrv& prv, double eps) {
  const long double q = 1.0L - static_cast<long double>(prv.mass_y_inf);
  if (q <= 0.0L) return 0.0;
  const long double tail_y = q - static_cast<long double>(prv.cdf_y(eps));
  const long double tail_x = (1.0L - static_cast<long double>(prv.mass_x_neg_inf)) -
                             static_cast<long double>(prv.cdf_x(eps));
  const long double d = (tail_y - expl(static_cast<long double>(eps)) * tail_x) / q;
  if (d < 0.0L) return 0.0;
  if (d > 1.0L) return 1.0;
  return static_cast<double>(d);
}

// Smallest eps >= 0 with curve(eps) <= delta_target, for a nonincreasing
// curve.  Brackets by doubling, then bisects; returns the right end of the
// final bracket so the result is always on the safe side.
inline double invert_nonincreasing(const std::function<double(double)>& curve,
                                   double delta_target,
                                   double eps_cap = 1e9) {
  if (curve(0.0) <= delta_target) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (curve(hi) > delta_target) {
    lo = hi;
    hi *= 2.0;
    if (hi > eps_cap) {
      throw NumericalGuardError(
          "invert_nonincreasing: curve stays above the target up to eps = " +
          std::to_string(eps_cap));
    }
  }
  for (int i = 0; i < 200 && hi - lo > 1e-9 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (curve(mid) > delta_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// eps at which the finite part of the mechanism reaches delta_target.
inline double mechanism_epsilon(const MechanismPrv& prv, double delta_target) {
  return invert_nonincreasing(
      [&prv](double e) { return mechanism_delta_conditional(prv, e); },
      delta_target);
}

}  // namespace dpacct

#endif  // DPACCT_PRV_HPP_
