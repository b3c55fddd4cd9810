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

#include "dpacct/discretization.hpp"

#include <cmath>

#include "dpacct/budget.hpp"
#include "dpacct/prv.hpp"
#include "gtest/gtest.h"
#include "oracles.hpp"

namespace dpacct {
namespace {

TEST(Lattice, ValidatesHalfWidth) {
  EXPECT_EQ(lattice_steps(0.1, 1.05), 10);
  EXPECT_THROW(lattice_steps(0.1, 1.0), ValidationError);
  EXPECT_THROW(lattice_steps(0.1, 0.05), ValidationError);  // needs n >= 1
  EXPECT_THROW(lattice_steps(0.0, 1.05), ValidationError);
}

TEST(Discretize, PointMassLandsInCenterBin) {
  MechanismPrv prv = gaussian_prv(1.0, 0.0);
  DiscretePrv d = discretize(prv, 0.1, 1.05);
  ASSERT_EQ(d.probs.size(), 21u);
  for (std::int64_t i = -10; i <= 10; ++i) {
    EXPECT_EQ(d.probs[static_cast<std::size_t>(i + 10)], i == 0 ? 1.0 : 0.0);
  }
  EXPECT_EQ(d.shift, 0.0);
  EXPECT_EQ(d.trunc_mass, 0.0);
}

TEST(Discretize, GaussianLatticeMeanMatchesTruncatedNormal) {
  // Y = N(0.5, 1), h = 0.01, L = 10.005: the shifted lattice mean must equal
  // the truncated-normal conditional mean (0.5 up to ~1e-20 tail terms).
  MechanismPrv prv = gaussian_prv(1.0, 1.0);
  DiscretePrv d = discretize(prv, 0.01, 10.005);
  long double mean = 0.0L;
  const std::int64_t n = d.n();
  for (std::int64_t i = -n; i <= n; ++i) {
    mean += d.probs[static_cast<std::size_t>(i + n)] *
            (static_cast<long double>(i) * d.mesh + d.shift);
  }
  EXPECT_NEAR(static_cast<double>(mean), 0.5, 1e-9);
}

TEST(Discretize, ApproxDpAtomsRenormalized) {
  // eps = 0.3 at h = 0.1 puts the atoms exactly on lattice points +-3; the
  // finite part (mass 0.9) renormalizes to the atom weights of the pure
  // curve, and delta rides along as infinity mass.
  MechanismPrv prv = approx_dp_prv(0.3, 0.1);
  DiscretePrv d = discretize(prv, 0.1, 1.05);
  const std::int64_t n = d.n();
  const double p_minus = 1.0 / (std::exp(0.3) + 1.0);
  const double p_plus = std::exp(0.3) / (std::exp(0.3) + 1.0);
  EXPECT_NEAR(d.probs[static_cast<std::size_t>(-3 + n)], p_minus, 1e-12);
  EXPECT_NEAR(d.probs[static_cast<std::size_t>(3 + n)], p_plus, 1e-12);
  EXPECT_DOUBLE_EQ(d.mass_inf, 0.1);
  EXPECT_NEAR(d.trunc_mass, 0.0, 1e-15);
  long double sum = 0.0L;
  for (double q : d.probs) sum += q;
  EXPECT_NEAR(static_cast<double>(sum), 1.0, 1e-12);
}

TEST(Discretize, ZeroWindowMassRejected) {
  MechanismPrv far = dpacct_test::step_mechanism({{10.0, 1.0}});
  EXPECT_THROW(discretize(far, 0.1, 1.05), ValidationError);
}

TEST(Discretize, ShiftBoundedByHalfMesh) {
  for (double h : {0.01, 0.001}) {
    for (const MechanismPrv& prv :
         {gaussian_prv(1.0, 1.0), laplace_prv(1.0),
          subsample_prv(gaussian_prv(0.8, 1.0), {1e-3})}) {
      const double L = (std::ceil(4.0 / h) + 0.5) * h;
      DiscretePrv d = discretize(prv, h, L);
      EXPECT_LE(std::fabs(d.shift), 0.5 * h + 1e-9);
    }
  }
}

// Kolmogorov form of the coupling |Y^L - (Y~ - shift)| <= h/2: along the
// value axis the unshifted discretized CDF stays within h/2 of the
// truncated CDF.
TEST(Discretize, CouplingWithinHalfBin) {
  MechanismPrv prv = gaussian_prv(1.0, 1.0);
  const double h = 0.01, L = 6.005;
  DiscretePrv d = discretize(prv, h, L);
  const double mass = window_mass(prv, L);
  const std::int64_t n = d.n();
  auto trunc_cdf = [&](double t) {
    if (t < -L) return 0.0;
    if (t >= L) return 1.0;
    return (prv.cdf_y(t) - prv.cdf_y(-L)) / mass;
  };
  long double disc = 0.0L;
  for (std::int64_t i = -n; i <= n; ++i) {
    disc += d.probs[static_cast<std::size_t>(i + n)];
    const double lattice_value = static_cast<double>(i) * h;
    // Pr[Y~ - shift <= ih] must straddle the truncated CDF within h/2.
    EXPECT_LE(trunc_cdf(lattice_value - 0.5 * h) - 1e-9,
              static_cast<double>(disc));
    EXPECT_GE(trunc_cdf(lattice_value + 0.5 * h) + 1e-9,
              static_cast<double>(disc));
  }
}

TEST(Discretize, LatticeSupportedInputReproducedExactly) {
  const double h = 0.125;  // binary-exact mesh
  MechanismPrv prv = dpacct_test::step_mechanism(
      {{-3 * h, 0.25}, {0.0, 0.375}, {2 * h, 0.375}});
  DiscretePrv d = discretize(prv, h, (16 + 0.5) * h);
  const std::int64_t n = d.n();
  EXPECT_EQ(d.shift, 0.0);
  EXPECT_EQ(d.probs[static_cast<std::size_t>(-3 + n)], 0.25);
  EXPECT_EQ(d.probs[static_cast<std::size_t>(0 + n)], 0.375);
  EXPECT_EQ(d.probs[static_cast<std::size_t>(2 + n)], 0.375);
}

TEST(Discretize, MeanMatchingHoldsForSubsampledMechanism) {
  MechanismPrv prv = subsample_prv(gaussian_prv(0.8, 1.0), {1e-3});
  const double h = mesh_size(1000, 0.1, 1e-10);
  const double L = truncation_bound(3.0, 2.5, 0.1, h);
  DiscretePrv d = discretize(prv, h, L);
  long double mean = 0.0L;
  const std::int64_t n = d.n();
  for (std::int64_t i = -n; i <= n; ++i) {
    mean += d.probs[static_cast<std::size_t>(i + n)] *
            (static_cast<long double>(i) * h + d.shift);
  }
  const double oracle =
      dpacct_test::subsampled_gaussian_mean_oracle(0.8, 1e-3, -L, L);
  EXPECT_NEAR(static_cast<double>(mean), oracle, 1e-10);
}

TEST(Discretize, TruncMassObeysPrvTailBound) {
  // Cross-check: the dropped tail is below the generic PRV tail
  // bound evaluated at (eps = L - 2, delta(L - 2), t = 2).
  MechanismPrv prv = gaussian_prv(0.5, 1.0);
  const double h = 0.001, L = 5.0005;
  DiscretePrv d = discretize(prv, h, L);
  const double delta_at_lm2 = mechanism_delta(prv, L - 2.0);
  const double bound = prv_tail_bound(L - 2.0, delta_at_lm2, 2.0);
  EXPECT_GT(d.trunc_mass, 0.0);
  EXPECT_LE(d.trunc_mass, bound);
}

}  // namespace
}  // namespace dpacct
