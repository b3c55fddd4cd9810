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

#ifndef DPACCT_DISCRETIZATION_HPP_
#define DPACCT_DISCRETIZATION_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dpacct/errors.hpp"
#include "dpacct/prv.hpp"

namespace dpacct {

// A PRV reduced to a lattice:  mass probs[i + n] sits at value i*h + shift
// for -n <= i <= n, where n = (L - h/2)/h.  The 2n+1 half-open bins
// (ih - h/2, ih + h/2] tile the window (-L, L] exactly.
//
// probs is normalized to sum 1; the dropped tail (trunc_mass) and the source
// mechanism's Pr[Y = +inf] (mass_inf) are carried for the error ledger, not
// folded into probs.  The shift makes the lattice mean equal the truncated
// conditional mean, which is what keeps the k-fold composition error at
// sqrt(k)*h instead of k*h.
struct DiscretePrv {
  double mesh = 0.0;          // h
  double half_width = 0.0;    // L, with L = h/2 + n*h
  double shift = 0.0;         // mu in [-h/2, h/2]
  std::vector<double> probs;  // size 2n+1
  double mass_inf = 0.0;
  double trunc_mass = 0.0;    // finite-part mass outside (-L, L]

  std::int64_t n() const {
    return (static_cast<std::int64_t>(probs.size()) - 1) / 2;
  }
  double value_at(std::int64_t index) const { return index * mesh + shift; }
};

// Number of positive lattice steps for a (mesh, half_width) pair, validating
// half_width = mesh/2 + n*mesh for a positive integer n.
inline std::int64_t lattice_steps(double mesh, double half_width) {
  if (!(mesh > 0.0) || !std::isfinite(mesh)) {
    throw ValidationError("lattice: mesh must be positive");
  }
  const double ratio = half_width / mesh - 0.5;
  const double rounded = std::nearbyint(ratio);
  if (!(std::fabs(ratio - rounded) <= 1e-9) || rounded < 1.0) {
    throw ValidationError(
        "lattice: half_width must equal mesh/2 + n*mesh for integer n >= 1");
  }
  return static_cast<std::int64_t>(rounded);
}

namespace internal {

inline DiscretePrv discretize_impl(const MechanismPrv& prv, double mesh,
                                   double half_width, bool mean_match);

}  // namespace internal

// Bin a PRV's CDF onto the lattice and mean-match.
//
//   q_i   = CDF_Y(ih + h/2) - CDF_Y(ih - h/2), then normalized to sum 1
//   shift = E[Y | -L < Y <= L] - sum_i ih q_i
//
// Bins are half-open on the left so an atom on a bin edge is counted exactly
// once.  An atom exactly at -L falls outside every bin and is charged to
// trunc_mass.
inline DiscretePrv discretize(const MechanismPrv& prv, double mesh,
                              double half_width) {
  return internal::discretize_impl(prv, mesh, half_width, true);
}

namespace internal {

// mean_match = false skips the conditional-mean quadrature and leaves the
// shift at zero; used while searching for a window, where a worst-case
// |shift| <= h/2 allowance replaces the exact value.
inline DiscretePrv discretize_impl(const MechanismPrv& prv, double mesh,
                                   double half_width, bool mean_match) {
  const std::int64_t n = lattice_steps(mesh, half_width);
  const std::int64_t m = 2 * n + 1;
  if (m > (std::int64_t{1} << 28)) {
    throw NumericalGuardError("discretize: grid of " + std::to_string(m) +
                              " bins exceeds the supported size");
  }

  DiscretePrv out;
  out.mesh = mesh;
  out.half_width = half_width;
  out.mass_inf = prv.mass_y_inf;
  out.probs.resize(static_cast<std::size_t>(m));

  long double unnormalized_sum = 0.0L;
  double prev_edge_cdf = prv.cdf_y((-static_cast<double>(n) - 0.5) * mesh);
  for (std::int64_t i = -n; i <= n; ++i) {
    const double hi_edge_cdf = prv.cdf_y((static_cast<double>(i) + 0.5) * mesh);
    const double q = std::max(0.0, hi_edge_cdf - prev_edge_cdf);
    out.probs[static_cast<std::size_t>(i + n)] = q;
    unnormalized_sum += q;
    prev_edge_cdf = hi_edge_cdf;
  }
  if (!(unnormalized_sum > 0.0L)) {
    throw ValidationError("discretize: no mass inside (-L, L]");
  }

  long double lattice_mean = 0.0L;
  const double inv_sum = static_cast<double>(1.0L / unnormalized_sum);
  for (std::int64_t i = -n; i <= n; ++i) {
    double& q = out.probs[static_cast<std::size_t>(i + n)];
    q *= inv_sum;
    lattice_mean += static_cast<long double>(i) * mesh * q;
  }

  if (mean_match) {
    const double cm = conditional_mean(prv, half_width);
    out.shift = static_cast<double>(cm - lattice_mean);
    if (!(std::fabs(out.shift) <= 0.5 * mesh + 1e-9)) {
      throw NumericalGuardError(
          "discretize: mean-matching shift " + std::to_string(out.shift) +
          " exceeds half the mesh " + std::to_string(mesh));
    }
  }

  const long double finite_total = 1.0L - static_cast<long double>(out.mass_inf);
  out.trunc_mass =
      std::max(0.0, static_cast<double>(finite_total - unnormalized_sum));
  return out;
}

}  // namespace internal

}  // namespace dpacct

#endif  // DPACCT_DISCRETIZATION_HPP_
