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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpacct/budget.hpp"
#include "dpacct/pipeline.hpp"
#include "dpacct/version.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitPrecisionFloor = 3;
constexpr int kExitIo = 4;
constexpr int kExitNumericalGuard = 5;

// Probabilities may arrive as JSON numbers or as decimal strings; strings
// avoid any intermediate rounding by the config producer.
double number_field(const json& v, const std::string& name) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t pos = 0;
    double parsed = 0.0;
    try {
      parsed = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw dpacct::ValidationError("config: field '" + name +
                                    "' is not a number: \"" + s + "\"");
    }
    if (pos != s.size()) {
      throw dpacct::ValidationError("config: field '" + name +
                                    "' has trailing characters: \"" + s + "\"");
    }
    return parsed;
  }
  if (v.is_number()) return v.get<double>();
  throw dpacct::ValidationError("config: field '" + name +
                                "' must be a number or decimal string");
}

double require_field(const json& obj, const std::string& name) {
  if (!obj.contains(name)) {
    throw dpacct::ValidationError("config: missing field '" + name + "'");
  }
  return number_field(obj.at(name), name);
}

dpacct::ComposeConfig parse_config(const json& root) {
  dpacct::ComposeConfig config;
  if (!root.contains("mechanisms") || !root.at("mechanisms").is_array() ||
      root.at("mechanisms").empty()) {
    throw dpacct::ValidationError(
        "config: 'mechanisms' must be a non-empty array");
  }
  for (const json& m : root.at("mechanisms")) {
    dpacct::MechanismConfig mc;
    const std::string kind = m.value("kind", std::string());
    if (kind == "gaussian") {
      mc.kind = dpacct::MechanismKind::kGaussian;
      mc.noise_scale = require_field(m, "noise_scale");
      mc.sensitivity =
          m.contains("sensitivity") ? number_field(m.at("sensitivity"), "sensitivity") : 1.0;
    } else if (kind == "laplace") {
      mc.kind = dpacct::MechanismKind::kLaplace;
      mc.shift = require_field(m, "shift");
    } else if (kind == "approx_dp") {
      mc.kind = dpacct::MechanismKind::kApproxDp;
      mc.eps = require_field(m, "eps");
      mc.delta = require_field(m, "delta");
    } else if (kind == "subsampled_gaussian") {
      mc.kind = dpacct::MechanismKind::kSubsampledGaussian;
      mc.noise_scale = require_field(m, "noise_scale");
      mc.sampling_prob = require_field(m, "sampling_prob");
    } else {
      throw dpacct::ValidationError(
          "config: mechanism kind must be one of gaussian, laplace, "
          "approx_dp, subsampled_gaussian");
    }
    if (m.contains("count")) {
      if (!m.at("count").is_number_integer()) {
        throw dpacct::ValidationError("config: 'count' must be an integer");
      }
      mc.count = m.at("count").get<std::int64_t>();
    }
    config.mechanisms.push_back(mc);
  }

  if (!root.contains("query") || !root.at("query").is_object()) {
    throw dpacct::ValidationError("config: 'query' object is required");
  }
  const json& q = root.at("query");
  if (q.contains("delta_target")) {
    config.query.type = dpacct::QueryConfig::Type::kDeltaTarget;
    config.query.delta_target = number_field(q.at("delta_target"), "delta_target");
  } else if (q.contains("eps_target")) {
    config.query.type = dpacct::QueryConfig::Type::kEpsTarget;
    config.query.eps_target = number_field(q.at("eps_target"), "eps_target");
  } else if (q.contains("curve")) {
    const json& c = q.at("curve");
    config.query.type = dpacct::QueryConfig::Type::kCurve;
    config.query.eps_min = require_field(c, "eps_min");
    config.query.eps_max = require_field(c, "eps_max");
    if (!c.contains("num_points") || !c.at("num_points").is_number_integer()) {
      throw dpacct::ValidationError("config: curve.num_points must be an integer");
    }
    config.query.num_points = c.at("num_points").get<int>();
  } else {
    throw dpacct::ValidationError(
        "config: query must contain delta_target, eps_target or curve");
  }

  config.eps_error = require_field(root, "eps_error");
  if (root.contains("delta_error")) {
    config.delta_error = number_field(root.at("delta_error"), "delta_error");
  }
  if (root.contains("eps_upper_override")) {
    config.eps_upper_override =
        number_field(root.at("eps_upper_override"), "eps_upper_override");
  }
  config.inverted_direction = root.value("inverted_direction", false);
  return config;
}

json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json report_to_json(const dpacct::Report& r) {
  json j;
  j["version"] = r.version;
  j["budget"] = {{"eps_error", r.budget.eps_error},
                 {"delta_error", r.budget.delta_error},
                 {"k", r.budget.k},
                 {"mesh", r.budget.mesh},
                 {"half_width", r.budget.half_width}};
  j["lattice_points"] = r.lattice_points;
  j["q_finite"] = r.q_finite;
  j["eps_upper"] = {{"each", finite_or_string(r.eps_upper_each)},
                    {"advanced_composition", finite_or_string(r.eps_upper_adv)},
                    {"mgf", finite_or_string(r.eps_upper_mgf)},
                    {"used", finite_or_string(r.eps_upper_total)},
                    {"route", r.eps_upper_route}};
  j["ledger"] = {{"sum_trunc_mass", r.ledger.sum_trunc_mass},
                 {"clamped_mass", r.ledger.clamped_mass},
                 {"eta0", r.ledger.eta0},
                 {"wrap_bound", finite_or_string(r.ledger.wrap_bound)},
                 {"wrap_window_mass", finite_or_string(r.ledger.wrap_window_mass)},
                 {"wrap_flagged", r.ledger.wrap_flagged}};
  j["mechanisms"] = json::array();
  for (const auto& md : r.mechanisms) {
    json m;
    m["kind"] = dpacct::kind_name(md.config.kind);
    switch (md.config.kind) {
      case dpacct::MechanismKind::kGaussian:
        m["noise_scale"] = md.config.noise_scale;
        m["sensitivity"] = md.config.sensitivity;
        break;
      case dpacct::MechanismKind::kLaplace:
        m["shift"] = md.config.shift;
        break;
      case dpacct::MechanismKind::kApproxDp:
        m["eps"] = md.config.eps;
        m["delta"] = md.config.delta;
        break;
      case dpacct::MechanismKind::kSubsampledGaussian:
        m["noise_scale"] = md.config.noise_scale;
        m["sampling_prob"] = md.config.sampling_prob;
        break;
    }
    m["count"] = md.config.count;
    m["trunc_mass"] = md.trunc_mass;
    m["mass_inf"] = md.mass_inf;
    m["shift"] = md.shift;
    j["mechanisms"].push_back(m);
  }
  if (r.delta.has_value()) {
    j["delta"] = {{"eps", r.delta->first},
                  {"lower", r.delta->second.lower},
                  {"estimate", r.delta->second.estimate},
                  {"upper", r.delta->second.upper}};
  }
  if (r.epsilon.has_value()) {
    j["epsilon"] = {{"delta", r.epsilon->first},
                    {"lower", finite_or_string(r.epsilon->second.lower)},
                    {"estimate", finite_or_string(r.epsilon->second.estimate)},
                    {"upper", finite_or_string(r.epsilon->second.upper)}};
    if (!r.epsilon->second.diagnostic.empty()) {
      j["epsilon"]["diagnostic"] = r.epsilon->second.diagnostic;
    }
  }
  if (!r.curve.empty()) {
    json rows = json::array();
    for (const auto& row : r.curve) {
      rows.push_back({{"eps", row.eps},
                      {"delta_lower", row.lower},
                      {"delta_est", row.estimate},
                      {"delta_upper", row.upper}});
    }
    j["curve"] = std::move(rows);
  }
  return j;
}

void print_report_text(const dpacct::Report& r) {
  std::printf("dpacct %s\n", r.version.c_str());
  std::printf("mechanisms:\n");
  for (const auto& md : r.mechanisms) {
    std::printf("  - %-20s x %-8lld trunc_mass=%.3e shift=%+.3e\n",
                dpacct::kind_name(md.config.kind),
                static_cast<long long>(md.config.count), md.trunc_mass,
                md.shift);
  }
  std::printf(
      "derived: k=%lld  h=%.9e  L=%.9e  grid=%lld  eps_error=%g  "
      "delta_error=%g\n",
      static_cast<long long>(r.budget.k), r.budget.mesh, r.budget.half_width,
      static_cast<long long>(r.lattice_points), r.budget.eps_error,
      r.budget.delta_error);
  std::printf("eps_upper: each=%.6g advanced=%.6g mgf=%.6g used=%.6g (%s)\n",
              r.eps_upper_each, r.eps_upper_adv, r.eps_upper_mgf,
              r.eps_upper_total, r.eps_upper_route.c_str());
  std::printf("q_finite=%.12g\n", r.q_finite);
  std::printf(
      "ledger: sum_trunc_mass=%.3e clamped=%.3e eta0=%.3e wrap_bound=%.3e "
      "wrap_window_mass=%.3e%s\n",
      r.ledger.sum_trunc_mass, r.ledger.clamped_mass, r.ledger.eta0,
      r.ledger.wrap_bound, r.ledger.wrap_window_mass,
      r.ledger.wrap_flagged ? "  [WRAP FLAGGED]" : "");
  if (r.delta.has_value()) {
    std::printf("delta(eps=%.17g): lower=%.17g estimate=%.17g upper=%.17g\n",
                r.delta->first, r.delta->second.lower, r.delta->second.estimate,
                r.delta->second.upper);
  }
  if (r.epsilon.has_value()) {
    std::printf("eps(delta=%.17g): lower=%.17g estimate=%.17g upper=%.17g\n",
                r.epsilon->first, r.epsilon->second.lower,
                r.epsilon->second.estimate, r.epsilon->second.upper);
    if (!r.epsilon->second.diagnostic.empty()) {
      std::printf("note: %s\n", r.epsilon->second.diagnostic.c_str());
    }
  }
  if (!r.curve.empty()) {
    std::printf("curve: %zu rows over eps in [%.17g, %.17g]\n", r.curve.size(),
                r.curve.front().eps, r.curve.back().eps);
  }
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dpacct::IoError("cannot open config file: " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw dpacct::ValidationError("config: invalid JSON (" +
                                  std::string(e.what()) + ")");
  }
  return root;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dpacct::IoError("cannot open output file: " + path);
  out << content;
  if (!out) throw dpacct::IoError("failed writing output file: " + path);
}

std::string metadata_path_for(const std::string& csv_path) {
  const std::size_t dot = csv_path.find_last_of('.');
  const std::size_t slash = csv_path.find_last_of('/');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
    return csv_path.substr(0, dot) + ".json";
  }
  return csv_path + ".json";
}

void write_curve_outputs(const dpacct::Report& r, const std::string& out_path) {
  std::ostringstream csv;
  csv << "eps,delta_lower,delta_est,delta_upper\n";
  char buf[256];
  for (const auto& row : r.curve) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", row.eps,
                  row.lower, row.estimate, row.upper);
    csv << buf;
  }
  write_text_file(out_path, csv.str());

  json meta;
  meta["mesh"] = r.budget.mesh;
  meta["half_width"] = r.budget.half_width;
  meta["k"] = r.budget.k;
  meta["eps_error"] = r.budget.eps_error;
  meta["delta_error"] = r.budget.delta_error;
  meta["q_finite"] = r.q_finite;
  meta["version"] = r.version;
  write_text_file(metadata_path_for(out_path), meta.dump(2) + "\n");
}

int run_validate_gaussian(double sigma, std::int64_t steps, double eps_error,
                          double delta_error) {
  dpacct::ComposeConfig config;
  dpacct::MechanismConfig mech;
  mech.kind = dpacct::MechanismKind::kGaussian;
  mech.noise_scale = sigma;
  mech.sensitivity = 1.0;
  mech.count = steps;
  config.mechanisms.push_back(mech);
  config.eps_error = eps_error;
  config.delta_error = delta_error;
  const double mu_total = std::sqrt(static_cast<double>(steps)) / sigma;

  // probe query to derive the budget, then sweep the curve window
  config.query.type = dpacct::QueryConfig::Type::kEpsTarget;
  config.query.eps_target = 0.0;
  dpacct::Report probe = dpacct::run_pipeline(config);
  const double window =
      probe.budget.half_width - probe.budget.eps_error;
  const double eps_max = std::min(3.0, window);
  const int points = 25;

  config.query.type = dpacct::QueryConfig::Type::kCurve;
  config.query.eps_min = 0.0;
  config.query.eps_max = eps_max;
  config.query.num_points = points;
  dpacct::Report r = dpacct::run_pipeline(config);

  std::printf("validate-gaussian: sigma=%g steps=%lld mu=%g eps_error=%g "
              "delta_error=%g h=%.3e L=%.4f\n",
              sigma, static_cast<long long>(steps), mu_total, eps_error,
              delta_error, r.budget.mesh, r.budget.half_width);
  bool all_ok = true;
  for (const auto& row : r.curve) {
    const double exact = dpacct::analytic_gaussian_delta(mu_total, row.eps);
    const bool ok = row.lower <= exact && exact <= row.upper;
    all_ok = all_ok && ok;
    std::printf("eps=%-10.6f lower=%.6e exact=%.6e upper=%.6e  %s\n", row.eps,
                row.lower, exact, row.upper, ok ? "PASS" : "FAIL");
  }
  std::printf("validate-gaussian: %s\n", all_ok ? "PASS" : "FAIL");
  return all_ok ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpacct: certified accounting for composed differential "
               "privacy guarantees"};
  app.set_version_flag("--version", std::string(dpacct::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;

  CLI::App* compose = app.add_subcommand(
      "compose", "Compose the mechanisms in a JSON config and answer its query");
  compose->add_option("--config", config_path, "JSON config path")->required();
  compose->add_option("--out", out_path, "write the JSON report here");

  double sigma = 1.0, sampling_prob = 1.0, delta = 1e-6;
  double eps_error = 0.1, delta_error = -1.0;
  std::int64_t steps = 1;
  bool inverted = false;
  CLI::App* dpsgd = app.add_subcommand(
      "dpsgd", "Accounting for k steps of the subsampled Gaussian mechanism");
  dpsgd->add_option("--sigma", sigma, "noise scale")->required();
  dpsgd->add_option("--sampling-prob", sampling_prob, "sampling probability")
      ->required();
  dpsgd->add_option("--steps", steps, "number of compositions")->required();
  dpsgd->add_option("--delta", delta, "target delta")->required();
  dpsgd->add_option("--eps-error", eps_error, "additive epsilon accuracy");
  dpsgd->add_option("--delta-error", delta_error,
                    "additive delta accuracy (default delta/1000, floored at 1e-10)");
  dpsgd->add_flag("--inverted-direction", inverted,
                  "account the reversed neighboring direction");
  dpsgd->add_option("--out", out_path, "write the JSON report here");

  CLI::App* curve = app.add_subcommand(
      "curve", "Write delta(eps) bounds over a grid as CSV plus metadata");
  curve->add_option("--config", config_path, "JSON config path")->required();
  curve->add_option("--out", out_path, "output CSV path")->required();

  double vg_sigma = 1.0, vg_eps_error = 0.1, vg_delta_error = 1e-10;
  std::int64_t vg_steps = 1;
  CLI::App* validate = app.add_subcommand(
      "validate-gaussian",
      "Check the sandwich against the closed-form Gaussian curve (p=1)");
  validate->add_option("--sigma", vg_sigma, "noise scale")->required();
  validate->add_option("--steps", vg_steps, "number of compositions")->required();
  validate->add_option("--eps-error", vg_eps_error, "additive epsilon accuracy")
      ->required();
  validate->add_option("--delta-error", vg_delta_error, "additive delta accuracy");

  CLI11_PARSE(app, argc, argv);

  try {
    if (compose->parsed()) {
      dpacct::ComposeConfig cfg = parse_config(load_json_file(config_path));
      dpacct::Report r = dpacct::run_pipeline(cfg);
      print_report_text(r);
      if (!out_path.empty()) {
        write_text_file(out_path, report_to_json(r).dump(2) + "\n");
      }
      return kExitOk;
    }
    if (dpsgd->parsed()) {
      if (delta_error < 0.0) {
        delta_error = std::max(delta / 1000.0, dpacct::kDeltaFloor);
      }
      dpacct::Report r = dpacct::run_dpsgd(sigma, sampling_prob, steps, delta,
                                           eps_error, delta_error, inverted);
      print_report_text(r);
      if (!out_path.empty()) {
        write_text_file(out_path, report_to_json(r).dump(2) + "\n");
      }
      return kExitOk;
    }
    if (curve->parsed()) {
      dpacct::ComposeConfig cfg = parse_config(load_json_file(config_path));
      if (cfg.query.type != dpacct::QueryConfig::Type::kCurve) {
        throw dpacct::ValidationError(
            "curve subcommand requires a config with a curve query");
      }
      dpacct::Report r = dpacct::run_pipeline(cfg);
      write_curve_outputs(r, out_path);
      std::printf("wrote %zu curve rows to %s (metadata: %s)\n",
                  r.curve.size(), out_path.c_str(),
                  metadata_path_for(out_path).c_str());
      return kExitOk;
    }
    if (validate->parsed()) {
      return run_validate_gaussian(vg_sigma, vg_steps, vg_eps_error,
                                   vg_delta_error);
    }
  } catch (const dpacct::PrecisionFloorError& e) {
    std::fprintf(stderr, "E_PRECISION_FLOOR: %s\n", e.what());
    return kExitPrecisionFloor;
  } catch (const dpacct::IoError& e) {
    std::fprintf(stderr, "E_IO: %s\n", e.what());
    return kExitIo;
  } catch (const dpacct::NumericalGuardError& e) {
    std::fprintf(stderr, "E_NUMERICAL_GUARD: %s\n", e.what());
    return kExitNumericalGuard;
  } catch (const dpacct::ValidationError& e) {
    std::fprintf(stderr, "E_VALIDATION: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "E_INTERNAL: %s\n", e.what());
    return kExitNumericalGuard;
  }
  return kExitOk;
}
