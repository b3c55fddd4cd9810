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

#ifndef DPACCT_NORMAL_HPP_
#define DPACCT_NORMAL_HPP_

#include <cmath>

namespace dpacct {

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

// Standard normal CDF.  erfc keeps full relative precision in both tails,
// which matters when differencing CDF values around 1e-15.
inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / kSqrt2);
}

inline long double std_normal_cdf_l(long double x) {
  return 0.5L * erfcl(-x / 1.41421356237309504880168872420969808L);
}

inline double std_normal_pdf(double x) {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// E[W | a < W <= b] for W ~ N(mean, stddev^2).
// Standard inverse-Mills form; the denominator is the window mass.
inline double truncated_normal_conditional_mean(double mean, double stddev,
                                                double a, double b) {
  const long double alpha = (a - mean) / stddev;
  const long double beta = (b - mean) / stddev;
  const long double pdf_a =
      0.398942280401432677939946059934381868L * expl(-0.5L * alpha * alpha);
  const long double pdf_b =
      0.398942280401432677939946059934381868L * expl(-0.5L * beta * beta);
  const long double mass = std_normal_cdf_l(beta) - std_normal_cdf_l(alpha);
  return static_cast<double>(mean - stddev * (pdf_b - pdf_a) / mass);
}

}  // namespace dpacct

#endif  // DPACCT_NORMAL_HPP_
