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

#include "dpacct/composition.hpp"

#include <cmath>
#include <random>

#include "dpacct/budget.hpp"
#include "dpacct/discretization.hpp"
#include "dpacct/prv.hpp"
#include "gtest/gtest.h"
#include "oracles.hpp"

namespace dpacct {
namespace {

DiscretePrv make_lattice(double mesh, std::int64_t n, std::vector<double> probs,
                         double shift = 0.0) {
  DiscretePrv d;
  d.mesh = mesh;
  d.half_width = (static_cast<double>(n) + 0.5) * mesh;
  d.shift = shift;
  d.probs = std::move(probs);
  return d;
}

DiscretePrv random_lattice(double mesh, std::int64_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> probs(static_cast<std::size_t>(2 * n + 1));
  long double sum = 0.0L;
  for (auto& q : probs) sum += (q = u(rng));
  for (auto& q : probs) q = static_cast<double>(q / sum);
  return make_lattice(mesh, n, std::move(probs));
}

TEST(CircularConvolve, PointMassAtZeroIsIdentity) {
  std::mt19937_64 rng(3);
  DiscretePrv b = random_lattice(0.1, 8, rng);
  std::vector<double> delta0(17, 0.0);
  delta0[8] = 1.0;
  DiscretePrv a = make_lattice(0.1, 8, delta0);
  ComposedPrv c = circular_convolve(a, b);
  for (std::size_t i = 0; i < b.probs.size(); ++i) {
    EXPECT_NEAR(c.probs[i], b.probs[i], 1e-14);
  }
  EXPECT_EQ(c.total_shift, 0.0);
}

TEST(CircularConvolve, BernoulliPair) {
  // {-h: 1/2, +h: 1/2} convolved with itself -> {-2h: 1/4, 0: 1/2, +2h: 1/4}
  std::vector<double> two(9, 0.0);
  two[3] = 0.5;  // index -1
  two[5] = 0.5;  // index +1
  DiscretePrv a = make_lattice(0.25, 4, two);
  ComposedPrv c = circular_convolve(a, a);
  EXPECT_NEAR(c.probs[2], 0.25, 1e-15);  // index -2
  EXPECT_NEAR(c.probs[4], 0.50, 1e-15);  // index 0
  EXPECT_NEAR(c.probs[6], 0.25, 1e-15);  // index +2
  EXPECT_NEAR(c.probs[3], 0.0, 1e-15);
}

TEST(CircularConvolve, WrapsAroundModTwoL) {
  // A point mass at value L (top lattice slot with shift h/2) plus a point
  // mass at value h wraps to -L + h.
  const double h = 0.5;
  const std::int64_t n = 4;
  std::vector<double> top(9, 0.0), at_h(9, 0.0);
  top[8] = 1.0;   // index +n, with shift h/2 the value is nh + h/2 = L
  at_h[5] = 1.0;  // index +1, value h
  DiscretePrv a = make_lattice(h, n, top, 0.5 * h);
  DiscretePrv b = make_lattice(h, n, at_h, 0.0);
  ComposedPrv c = circular_convolve(a, b);
  // index sum n + 1 wraps to -n; with the residual shift h/2 that slot holds
  // the value -nh + h/2 = -L + h
  EXPECT_NEAR(c.probs[0], 1.0, 1e-14);
  EXPECT_DOUBLE_EQ(c.total_shift, 0.5 * h);
  EXPECT_NEAR(c.value_at(-n), -a.half_width + h, 1e-15);
}

TEST(CircularConvolve, RejectsMismatchedLattices) {
  std::mt19937_64 rng(5);
  DiscretePrv a = random_lattice(0.1, 4, rng);
  DiscretePrv b = random_lattice(0.2, 4, rng);
  EXPECT_THROW(circular_convolve(a, b), ValidationError);
}

TEST(SelfCompose, CountOneIsIdentity) {
  std::mt19937_64 rng(17);
  DiscretePrv a = random_lattice(0.05, 16, rng);
  a.shift = 0.02;
  ComposedPrv c = self_compose(a, 1);
  for (std::size_t i = 0; i < a.probs.size(); ++i) {
    EXPECT_NEAR(c.probs[i], a.probs[i], 1e-14);
  }
  EXPECT_DOUBLE_EQ(c.total_shift, 0.02);
}

TEST(SelfCompose, MatchesIteratedConvolution) {
  std::mt19937_64 rng(23);
  DiscretePrv a = random_lattice(0.1, 16, rng);  // 33 bins
  a.shift = 0.03;
  ComposedPrv direct = self_compose(a, 4);
  ComposedPrv iterated = circular_convolve(
      circular_convolve(from_discrete(a), from_discrete(a)),
      circular_convolve(from_discrete(a), from_discrete(a)));
  ASSERT_EQ(direct.probs.size(), iterated.probs.size());
  for (std::size_t i = 0; i < direct.probs.size(); ++i) {
    EXPECT_NEAR(direct.probs[i], iterated.probs[i], 1e-12);
  }
  EXPECT_NEAR(direct.total_shift, iterated.total_shift, 1e-12);
}

TEST(SelfCompose, BinomialProfile) {
  // {-h: 1/2, +h: 1/2} composed k = 8 times: the center bin carries
  // C(8,4)/2^8 = 0.2734375.
  std::vector<double> two(41, 0.0);
  two[19] = 0.5;
  two[21] = 0.5;
  DiscretePrv a = make_lattice(0.1, 20, two);
  ComposedPrv c = self_compose(a, 8);
  EXPECT_NEAR(c.probs[20], 0.2734375, 1e-12);
  EXPECT_NEAR(c.probs[22], 0.21875, 1e-12);  // C(8,5)/2^8
}

TEST(Compose, GroupingIsConsistent) {
  std::mt19937_64 rng(29);
  DiscretePrv a = random_lattice(0.1, 12, rng);
  ComposedPrv grouped = compose({{a, 2}});
  ComposedPrv split = compose({{a, 1}, {a, 1}});
  for (std::size_t i = 0; i < grouped.probs.size(); ++i) {
    EXPECT_NEAR(grouped.probs[i], split.probs[i], 1e-12);
  }
}

TEST(Compose, EmptySequenceRejected) {
  EXPECT_THROW(compose({}), ValidationError);
}

TEST(Compose, TwoGaussiansMatchTheirPythagoreanSum) {
  // mu_a = 1 and mu_b = sqrt(3) compose to the mu = 2 Gaussian curve.
  const double h = 0.001;
  const double L = truncation_bound(12.0, 9.0, 0.05, h);
  const MechanismPrv a = gaussian_prv(1.0, 1.0);
  const MechanismPrv b = gaussian_prv(1.0 / std::sqrt(3.0), 1.0);
  ComposedPrv c = compose(
      {{discretize(a, h, L), 1}, {discretize(b, h, L), 1}}, 1e-10 / 6);
  ErrorBudget budget{0.05, 1e-10, 2, h, L};
  const DeltaEstimate est = delta_at(c, 1.0, budget);
  const double exact = analytic_gaussian_delta(2.0, 1.0);
  EXPECT_LE(est.lower, exact);
  EXPECT_GE(est.upper, exact);
  EXPECT_NEAR(est.estimate, exact, 1e-4);
}

TEST(DeltaTilde, SingleAtomFormula) {
  // point mass at y = 2: delta~(2) = 0 and delta~(0) = 1 - e^{-2}
  std::vector<double> atom(41, 0.0);
  atom[24] = 1.0;  // index 4 at h = 0.5 -> value 2.0
  DiscretePrv a = make_lattice(0.5, 20, atom);
  ComposedPrv c = from_discrete(a);
  EXPECT_EQ(c.delta_tilde(2.0), 0.0);
  EXPECT_NEAR(c.delta_tilde(0.0), 1.0 - std::exp(-2.0), 1e-15);
}

TEST(DeltaAt, PureDpBoundedSupport) {
  // (0.1, 0)-DP composed 10 times on an aligned lattice: no mass above
  // eps = 1.0, so the estimate vanishes and the upper bound at 1.0 +
  // eps_error is exactly delta_error.
  const double eps0 = 0.1;
  const double h = eps0 / 64;  // eps0 is an exact multiple of h
  const double eps_error = h * std::sqrt((10.0 / 2.0) * std::log(12.0 / 1e-10));
  const double L = truncation_bound(1.0, 0.2, eps_error, h);
  DiscretePrv d = discretize(approx_dp_prv(eps0, 0.0), h, L);
  ComposedPrv c = self_compose(d, 10);
  ErrorBudget budget{eps_error, 1e-10, 10, h, L};
  // The mean-matching shift reintroduces a few ulps of misalignment, so the
  // top atom can contribute a ~1e-15 sliver at exactly k*eps0.
  EXPECT_LE(c.delta_tilde(10 * eps0), 1e-13);
  const DeltaEstimate at_eps = delta_at(c, 10 * eps0, budget);
  EXPECT_LE(at_eps.estimate, 1e-13);
  const DeltaEstimate beyond = delta_at(c, 10 * eps0 + eps_error, budget);
  EXPECT_LE(beyond.upper, 1e-10 + 1e-13);
}

TEST(DeltaAt, GaussianMatchesClosedFormTightly) {
  // Finely discretized single Gaussian: delta~(1) within 1e-6 of the
  // closed-form 0.12693673750664395.
  const double h = 1e-4;
  const double L = (200000 + 0.5) * h;  // 20.00005
  DiscretePrv d = discretize(gaussian_prv(1.0, 1.0), h, L);
  ComposedPrv c = from_discrete(d);
  EXPECT_NEAR(c.delta_tilde(1.0), 0.12693673750664395, 1e-6);
}

TEST(DeltaAt, WindowIsEnforced) {
  DiscretePrv d = discretize(gaussian_prv(1.0, 1.0), 0.01, 8.005);
  ComposedPrv c = from_discrete(d);
  ErrorBudget budget{0.1, 1e-9, 1, 0.01, 8.005};
  EXPECT_NO_THROW(delta_at(c, 7.9, budget));
  EXPECT_THROW(delta_at(c, 7.95, budget), ValidationError);
  EXPECT_THROW(delta_at(c, -0.1, budget), ValidationError);
  try {
    delta_at(c, 7.95, budget);
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("7.9"), std::string::npos);
  }
}

TEST(DeltaAt, CurvesAreOrderedAndMonotone) {
  DiscretePrv d = discretize(subsample_prv(gaussian_prv(1.0, 1.0), {0.05}),
                             0.002, 6.001);
  ComposedPrv c = self_compose(d, 100);
  ErrorBudget budget{0.05, 1e-9, 100, 0.002, 6.001};
  DeltaEstimate prev;
  bool first = true;
  for (int i = 0; i <= 1000; ++i) {
    const double eps = 5.5 * i / 1000.0;
    const DeltaEstimate est = delta_at(c, eps, budget);
    EXPECT_LE(est.lower, est.estimate);
    EXPECT_LE(est.estimate, est.upper);
    if (!first) {
      EXPECT_LE(est.lower, prev.lower + 1e-15);
      EXPECT_LE(est.estimate, prev.estimate + 1e-15);
      EXPECT_LE(est.upper, prev.upper + 1e-15);
    }
    prev = est;
    first = false;
  }
}

TEST(DeltaAt, InfinityMassFoldsIn) {
  // (0.5, 0.2)-DP once: delta(eps) >= 0.2 everywhere.
  const double h = 0.01;
  const double L = 4.005;
  DiscretePrv d = discretize(approx_dp_prv(0.5, 0.2), h, L);
  ComposedPrv c = self_compose(d, 1);
  EXPECT_DOUBLE_EQ(c.q_finite, 0.8);
  ErrorBudget budget{0.1, 1e-9, 1, h, L};
  const DeltaEstimate est = delta_at(c, 3.0, budget);
  EXPECT_NEAR(est.estimate, 0.2, 1e-12);
  EXPECT_GE(est.lower, 0.2 - 1e-9);
}

TEST(EpsilonAt, LeftEndpoint) {
  DiscretePrv d = discretize(gaussian_prv(1.0, 1.0), 0.01, 8.005);
  ComposedPrv c = from_discrete(d);
  ErrorBudget budget{0.1, 1e-9, 1, 0.01, 8.005};
  const double delta0 = delta_at(c, 0.0, budget).estimate;
  const EpsEstimate est = epsilon_at(c, delta0, budget);
  EXPECT_EQ(est.estimate, 0.0);
}

TEST(EpsilonAt, InvertsGaussianCurve) {
  const double h = 1e-4;
  const double L = (120000 + 0.5) * h;  // 12.00005
  DiscretePrv d = discretize(gaussian_prv(1.0, 1.0), h, L);
  ComposedPrv c = from_discrete(d);
  ErrorBudget budget{0.01, 1e-9, 1, h, L};
  const EpsEstimate est =
      epsilon_at(c, 0.12693673750664395, budget);
  EXPECT_NEAR(est.estimate, 1.0, 1e-3);
  EXPECT_LE(est.lower, est.estimate);
  EXPECT_LE(est.estimate, est.upper);
}

TEST(EpsilonAt, UnreachableTargetReturnsSentinel) {
  // Tiny window: the curve cannot fall to 1e-9 inside it.
  DiscretePrv d = discretize(gaussian_prv(1.0, 1.0), 0.01, 2.005);
  ComposedPrv c = from_discrete(d);
  ErrorBudget budget{0.5, 1e-10, 1, 0.01, 2.005};
  const EpsEstimate est = epsilon_at(c, 1e-9, budget);
  EXPECT_TRUE(std::isinf(est.upper));
  EXPECT_FALSE(est.diagnostic.empty());
}

TEST(EpsilonAt, EnforcesDeltaFloorAndRange) {
  DiscretePrv d = discretize(gaussian_prv(1.0, 1.0), 0.01, 4.005);
  ComposedPrv c = from_discrete(d);
  ErrorBudget budget{0.1, 1e-9, 1, 0.01, 4.005};
  EXPECT_THROW(epsilon_at(c, 1e-12, budget), PrecisionFloorError);
  EXPECT_THROW(epsilon_at(c, 1.0, budget), ValidationError);
}

TEST(WrapDiagnostic, QuietForConformingBudget) {
  DiscretePrv d = discretize(gaussian_prv(30.0, 1.0), 0.001, 8.0005);
  ComposedPrv c = self_compose(d, 1000);
  ErrorBudget budget{0.1, 1e-10, 1000, 0.001, 8.0005};
  record_wrap_diagnostic(c, budget);
  EXPECT_LE(c.ledger.wrap_window_mass, budget.delta_error);
  EXPECT_FALSE(c.ledger.wrap_flagged);
}

TEST(Ledger, AccumulatesAcrossCompose) {
  const double h = 0.001, L = 5.0005;
  DiscretePrv g = discretize(gaussian_prv(0.5, 1.0), h, L);
  EXPECT_GT(g.trunc_mass, 0.0);
  ComposedPrv c = compose({{g, 3}}, 1e-10 / 6);
  EXPECT_NEAR(c.ledger.sum_trunc_mass, 3.0 * g.trunc_mass, 1e-18);
  EXPECT_DOUBLE_EQ(c.ledger.eta0, 1e-10 / 6);
  EXPECT_LT(c.ledger.clamped_mass, 1e-8);
}

}  // namespace
}  // namespace dpacct
