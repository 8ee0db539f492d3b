#pragma once

// JSON views of the report types. Requires nlohmann/json on the include path.

#include <Eigen/Dense>
#include <json.hpp>

#include <vector>

#include "hsiscale/correction.hpp"
#include "hsiscale/metrics.hpp"
#include "hsiscale/synth.hpp"

namespace hsiscale {

inline nlohmann::json to_json_array(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline nlohmann::json to_json(const CorrectionReport& r) {
  return {
      {"psi_initial", r.psi_initial},
      {"psi_after_pso", r.psi_after_pso},
      {"psi_final", r.psi_final},
      {"clamped_pixels", r.clamped_pixels},
      {"candidate_count", r.candidate_count},
      {"normal", to_json_array(r.model.normal())},
      {"c_star", to_json_array(r.model.c_star())},
      {"seed", r.seed},
      {"degenerate", r.degenerate},
  };
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  auto opt = [&](const char* key, const auto& v) {
    if (v) j[key] = *v;
    else j[key] = nullptr;
  };
  opt("rmse_mu", r.rmse_mu);
  opt("abundance_rmse_total", r.abundance_rmse_total);
  j["abundance_rmse_per_endmember"] =
      r.abundance_rmse_per_endmember ? to_json_array(*r.abundance_rmse_per_endmember) : nlohmann::json(nullptr);
  opt("sad_mean", r.sad_mean);
  j["sad_per_endmember"] = r.sad_per_endmember ? to_json_array(*r.sad_per_endmember) : nlohmann::json(nullptr);
  opt("bound_rhs", r.bound_rhs);
  j["n_pixels"] = r.n_pixels;
  opt("sigma_max", r.sigma_max);
  opt("sigma_min", r.sigma_min);
  if (r.permutation)
    j["permutation"] = std::vector<long long>(r.permutation->begin(), r.permutation->end());
  else
    j["permutation"] = nullptr;
  return j;
}

inline nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json j = {
      {"height", c.height},
      {"width", c.width},
      {"bands", c.bands},
      {"endmembers", c.endmembers},
      {"field_kind", std::string(to_string(c.field_kind))},
      {"correlation_length", c.correlation_length},
      {"matern_nu", c.matern_nu},
      {"abundance_contrast", c.abundance_contrast},
      {"scale_std", c.scale_std},
      {"scale_correlation_length", c.scale_correlation_length},
      {"seed", c.seed},
  };
  j["snr_db"] = c.snr_db ? nlohmann::json(*c.snr_db) : nlohmann::json(nullptr);
  return j;
}

}  // namespace hsiscale
