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

#ifndef DPACCT_PIPELINE_HPP_
#define DPACCT_PIPELINE_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpacct/budget.hpp"
#include "dpacct/composition.hpp"
#include "dpacct/discretization.hpp"
#include "dpacct/errors.hpp"
#include "dpacct/prv.hpp"
#include "dpacct/version.hpp"

namespace dpacct {

enum class MechanismKind {
  kGaussian,
  kLaplace,
  kApproxDp,
  kSubsampledGaussian,
};

inline const char* kind_name(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kGaussian: return "gaussian";
    case MechanismKind::kLaplace: return "laplace";
    case MechanismKind::kApproxDp: return "approx_dp";
    case MechanismKind::kSubsampledGaussian: return "subsampled_gaussian";
  }
  return "unknown";
}

struct MechanismConfig {
  MechanismKind kind = MechanismKind::kGaussian;
  double noise_scale = 1.0;    // gaussian, subsampled_gaussian
  double sensitivity = 1.0;    // gaussian
  double shift = 1.0;          // laplace
  double eps = 0.0;            // approx_dp
  double delta = 0.0;          // approx_dp
  double sampling_prob = 1.0;  // subsampled_gaussian
  std::int64_t count = 1;
};

struct QueryConfig {
  enum class Type { kDeltaTarget, kEpsTarget, kCurve };
  Type type = Type::kDeltaTarget;
  double delta_target = 0.0;  // kDeltaTarget: invert delta(eps) at this delta
  double eps_target = 0.0;    // kEpsTarget: evaluate delta(eps) here
  double eps_min = 0.0;       // kCurve
  double eps_max = 0.0;
  int num_points = 0;
};

struct ComposeConfig {
  std::vector<MechanismConfig> mechanisms;
  QueryConfig query;
  double eps_error = 0.1;
  std::optional<double> delta_error;  // default: delta_target/1000, floored
  std::optional<double> eps_upper_override;
  bool inverted_direction = false;
};

struct MechanismDiagnostics {
  MechanismConfig config;
  double trunc_mass = 0.0;
  double mass_inf = 0.0;
  double shift = 0.0;
};

struct CurveRow {
  double eps = 0.0;
  double lower = 0.0;
  double estimate = 0.0;
  double upper = 0.0;
};

// Everything needed to reproduce and interpret a run.
struct Report {
  std::string version = kVersion;
  ErrorBudget budget;
  std::int64_t lattice_points = 0;
  double q_finite = 1.0;
  ErrorLedger ledger;
  double eps_upper_each = 0.0;
  double eps_upper_adv = 0.0;
  double eps_upper_mgf = 0.0;
  double eps_upper_total = 0.0;
  std::string eps_upper_route;
  std::vector<MechanismDiagnostics> mechanisms;
  std::optional<std::pair<double, DeltaEstimate>> delta;    // (eps, estimate)
  std::optional<std::pair<double, EpsEstimate>> epsilon;    // (delta, estimate)
  std::vector<CurveRow> curve;
};

inline MechanismPrv build_prv(const MechanismConfig& config, bool inverted) {
  MechanismPrv prv;
  switch (config.kind) {
    case MechanismKind::kGaussian:
      prv = gaussian_prv(config.noise_scale, config.sensitivity);
      break;
    case MechanismKind::kLaplace:
      prv = laplace_prv(config.shift);
      break;
    case MechanismKind::kApproxDp:
      prv = approx_dp_prv(config.eps, config.delta);
      break;
    case MechanismKind::kSubsampledGaussian:
      prv = subsample_prv(gaussian_prv(config.noise_scale, 1.0),
                          SubsampleParams{config.sampling_prob});
      break;
  }
  if (inverted) prv = invert_direction(prv);
  return prv;
}

// Full pipeline: derive (h, L), discretize, compose via FFT, then answer the
// configured query with the certified sandwich bounds.
inline Report run_pipeline(const ComposeConfig& config) {
  if (config.mechanisms.empty()) {
    throw ValidationError("config: at least one mechanism is required");
  }
  if (config.query.type == QueryConfig::Type::kDeltaTarget &&
      config.query.delta_target < kDeltaFloor) {
    throw PrecisionFloorError(
        "config: delta_target below the 1e-10 floating-point floor");
  }

  double delta_error;
  if (config.delta_error.has_value()) {
    delta_error = *config.delta_error;
  } else if (config.query.type == QueryConfig::Type::kDeltaTarget) {
    delta_error = std::max(config.query.delta_target / 1000.0, kDeltaFloor);
  } else {
    delta_error = kDeltaFloor;
  }
  if (delta_error < kDeltaFloor) {
    throw PrecisionFloorError(
        "config: delta_error below the 1e-10 floating-point floor");
  }

  std::vector<WeightedMechanism> weighted;
  weighted.reserve(config.mechanisms.size());
  for (const auto& mc : config.mechanisms) {
    if (mc.count < 1) {
      throw ValidationError("config: mechanism counts must be positive");
    }
    weighted.push_back(
        {build_prv(mc, config.inverted_direction), mc.count});
  }

  const BudgetResult budget_result = derive_budget(
      weighted, config.eps_error, delta_error, config.eps_upper_override);
  const ErrorBudget& budget = budget_result.budget;

  Report report;
  report.budget = budget;
  report.eps_upper_each = budget_result.eps_upper_each;
  report.eps_upper_adv = budget_result.eps_upper_adv;
  report.eps_upper_mgf = budget_result.eps_upper_mgf;
  report.eps_upper_total = budget_result.eps_upper_total;
  report.eps_upper_route = budget_result.route;

  std::vector<std::pair<DiscretePrv, std::int64_t>> items;
  items.reserve(weighted.size());
  for (std::size_t i = 0; i < weighted.size(); ++i) {
    DiscretePrv d = discretize(weighted[i].prv, budget.mesh, budget.half_width);
    report.mechanisms.push_back(MechanismDiagnostics{
        config.mechanisms[i], d.trunc_mass, d.mass_inf, d.shift});
    items.emplace_back(std::move(d), weighted[i].count);
  }

  ComposedPrv composed = compose(items, delta_error / 6.0);
  composed.ledger.wrap_bound = budget_result.wrap_bound;
  record_wrap_diagnostic(composed, budget);

  report.lattice_points = static_cast<std::int64_t>(composed.probs.size());
  report.q_finite = composed.q_finite;
  report.ledger = composed.ledger;

  switch (config.query.type) {
    case QueryConfig::Type::kDeltaTarget: {
      report.epsilon = {config.query.delta_target,
                        epsilon_at(composed, config.query.delta_target, budget)};
      break;
    }
    case QueryConfig::Type::kEpsTarget: {
      report.delta = {config.query.eps_target,
                      delta_at(composed, config.query.eps_target, budget)};
      break;
    }
    case QueryConfig::Type::kCurve: {
      const auto& q = config.query;
      if (!(q.eps_min >= 0.0) || !(q.eps_max >= q.eps_min) || q.num_points < 1) {
        throw ValidationError(
            "config: curve query needs 0 <= eps_min <= eps_max and at least "
            "one point");
      }
      const double window = budget.half_width - budget.eps_error;
      if (q.eps_max > window) {
        throw ValidationError(
            "config: curve eps_max " + std::to_string(q.eps_max) +
            " exceeds the valid query window [0, " + std::to_string(window) +
            "]");
      }
      report.curve.reserve(static_cast<std::size_t>(q.num_points));
      for (int i = 0; i < q.num_points; ++i) {
        const double eps =
            q.num_points == 1
                ? q.eps_min
                : q.eps_min + (q.eps_max - q.eps_min) *
                                  (static_cast<double>(i) / (q.num_points - 1));
        const DeltaEstimate est = delta_at(composed, eps, budget);
        report.curve.push_back(CurveRow{eps, est.lower, est.estimate, est.upper});
      }
      break;
    }
  }
  return report;
}

// DP-SGD accounting: the subsampled Gaussian composed with itself `steps`
// times, queried at the given delta.
inline Report run_dpsgd(double sigma, double sampling_prob, std::int64_t steps,
                        double delta, double eps_error, double delta_error,
                        bool inverted_direction = false) {
  ComposeConfig config;
  MechanismConfig mech;
  mech.kind = MechanismKind::kSubsampledGaussian;
  mech.noise_scale = sigma;
  mech.sampling_prob = sampling_prob;
  mech.count = steps;
  config.mechanisms.push_back(mech);
  config.query.type = QueryConfig::Type::kDeltaTarget;
  config.query.delta_target = delta;
  config.eps_error = eps_error;
  config.delta_error = delta_error;
  config.inverted_direction = inverted_direction;
  return run_pipeline(config);
}

}  // namespace dpacct

#endif  // DPACCT_PIPELINE_HPP_
