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

#ifndef DPACCT_BUDGET_TYPES_HPP_
#define DPACCT_BUDGET_TYPES_HPP_

#include <cstdint>

namespace dpacct {

// Numerical parameters derived from the user's accuracy targets.
//
//   mesh       h = eps_error / sqrt((k/2) ln(12/delta_error))
//   half_width L on the lattice mesh/2 + mesh*Z, at least 2 + eps_error
//
// With these, the composed lattice curve delta~ satisfies
//   delta~(eps + eps_error) - delta_error <= delta(eps)
//                                         <= delta~(eps - eps_error) + delta_error
// for eps in [0, half_width - eps_error].
struct ErrorBudget {
  double eps_error = 0.0;
  double delta_error = 0.0;
  std::int64_t k = 0;
  double mesh = 0.0;
  double half_width = 0.0;
};

}  // namespace dpacct

#endif  // DPACCT_BUDGET_TYPES_HPP_
