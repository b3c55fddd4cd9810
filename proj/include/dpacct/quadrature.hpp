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

#ifndef DPACCT_QUADRATURE_HPP_
#define DPACCT_QUADRATURE_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace dpacct {

// Adaptive quadrature on a uniform base partition, refined by bisection.
//
// Each cell carries the Richardson extrapolation of its trapezoid cascade
// (i.e. a Simpson value); a cell is accepted once the extrapolated values of
// its halves agree with its own to the width-apportioned share of abs_tol.
// Subsampled-mechanism CDFs have a region where the derivative scales like
// 1/p, so uniform nodes alone cannot reach 1e-12 at any sane node count;
// the refinement concentrates nodes there at fourth-order cost.  Jump
// discontinuities (CDF atoms) bottom out at max_depth and contribute at most
// jump * width / 2^max_depth each.
inline double integrate_adaptive(const std::function<double(double)>& f,
                                 double a, double b, double abs_tol,
                                 int base_intervals, int max_depth = 42) {
  if (!(b > a)) return 0.0;
  if (base_intervals < 1) base_intervals = 1;

  struct Cell {
    double a, b, fa, fm, fb;
    long double simpson;
    int depth;
  };

  auto simpson = [](double lo, double hi, double flo, double fmid,
                    double fhi) -> long double {
    return (static_cast<long double>(hi) - lo) / 6.0L *
           (static_cast<long double>(flo) + 4.0L * fmid + fhi);
  };

  const double inv_total_width = 1.0 / (b - a);
  long double total = 0.0L;
  std::vector<Cell> stack;
  stack.reserve(256);

  double prev_x = a;
  double prev_f = f(a);
  for (int i = 1; i <= base_intervals; ++i) {
    const double x = (i == base_intervals)
                         ? b
                         : a + (b - a) * (static_cast<double>(i) /
                                          base_intervals);
    const double fx = f(x);
    const double mid = 0.5 * (prev_x + x);
    const double fmid = f(mid);
    stack.push_back(
        Cell{prev_x, x, prev_f, fmid, fx, simpson(prev_x, x, prev_f, fmid, fx), 0});
    prev_x = x;
    prev_f = fx;
  }

  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    const double w = c.b - c.a;
    const double m = 0.5 * (c.a + c.b);
    const double lm = 0.5 * (c.a + m);
    const double rm = 0.5 * (m + c.b);
    const double flm = f(lm);
    const double frm = f(rm);
    const long double s_left = simpson(c.a, m, c.fa, flm, c.fm);
    const long double s_right = simpson(m, c.b, c.fm, frm, c.fb);
    const long double err = (s_left + s_right - c.simpson) / 15.0L;
    const double local_tol = abs_tol * w * inv_total_width;
    if (c.depth >= max_depth ||
        std::fabs(static_cast<double>(err)) <= local_tol) {
      total += s_left + s_right + err;
    } else {
      stack.push_back(Cell{c.a, m, c.fa, flm, c.fm, s_left, c.depth + 1});
      stack.push_back(Cell{m, c.b, c.fm, frm, c.fb, s_right, c.depth + 1});
    }
  }
  return static_cast<double>(total);
}

}  // namespace dpacct

#endif  // DPACCT_QUADRATURE_HPP_
