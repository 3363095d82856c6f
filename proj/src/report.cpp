// Copyright 2026 The qpdyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qpdyn/report.hpp"

#include <sstream>

#include "qpdyn/dataset_io.hpp"
#include "qpdyn/util.hpp"

namespace qpdyn::report {

using nlohmann::json;
using namespace qpdyn::pipeline;

namespace {

json measured(double value, double error) { return json{{"value", value}, {"error", error}}; }
json fixed(double value) { return json{{"value", value}, {"fixed", true}}; }

json linear_json(const fit::LinearFit& f) {
  return json{{"slope", measured(f.slope, f.slope_err)},
              {"intercept", measured(f.intercept, f.intercept_err)},
              {"chi2_red", f.result.reduced_chi2()}};
}

json config_json(const PipelineConfig& c) {
  return json{{"chi2_average", "reduced"},
              {"low_power_threshold_w", c.low_power_threshold},
              {"low_power_xin_limit", c.low_power_xin_limit},
              {"r_grid_per_s", c.effective_r_grid()},
              {"truncation_slack_sigma", c.truncation_slack},
              {"allow_single_point_suffix", c.allow_single_point_suffix},
              {"max_rel_rate_error", c.max_rel_rate_error},
              {"variance_floor", c.variance_floor},
              {"linear_fit_max_power_w", c.linear_fit_max_power},
              {"saturation_sigma", c.saturation_sigma},
              {"max_exclusion_fraction", c.max_exclusion_fraction},
              {"chi2_flat_factor", c.chi2_flat_factor},
              {"float_exp_offset", c.float_exp_offset},
              {"reference_position", to_string(c.reference_position)},
              {"shift_prefactor", c.shift_prefactor}};
}

// Row writer with shortest round-trip number formatting.
class Csv {
 public:
  explicit Csv(std::string_view header) { os_ << header << '\n'; }
  Csv& cell(double v) { return raw(format_double(v)); }
  Csv& cell(std::string_view s) { return raw(s); }
  Csv& cell(bool b) { return raw(b ? "1" : "0"); }
  Csv& cell(std::size_t n) { return raw(std::to_string(n)); }
  void end() {
    os_ << '\n';
    first_ = true;
  }
  std::string str() const { return os_.str(); }

 private:
  Csv& raw(std::string_view s) {
    if (!first_) os_ << ',';
    os_ << s;
    first_ = false;
    return *this;
  }
  std::ostringstream os_;
  bool first_ = true;
};

}  // namespace

json to_json(const PipelineReport& rep) {
  json j;
  j["schema"] = kReportSchema;
  j["provenance"] = {{"seed", rep.provenance.seed},
                     {"config_hash", rep.provenance.config_hash},
                     {"bundle_source", rep.provenance.bundle_source},
                     {"timestamp", rep.provenance.timestamp}};
  j["ok"] = rep.ok();
  j["stages"] = json::array();
  for (const auto& s : rep.stages) {
    j["stages"].push_back({{"name", s.name}, {"status", to_string(s.status)}, {"messages", s.messages}});
  }
  j["device"] = io::to_json(rep.device);
  j["config"] = config_json(rep.config);

  if (rep.trapping) {
    json t{{"s_per_s", measured(rep.trapping->summary.mean, rep.trapping->summary.std)},
           {"n", rep.trapping->summary.n},
           {"tau_qp_s", rep.trapping->summary.mean > 0.0 ? 1.0 / rep.trapping->summary.mean : 0.0}};
    t["entries"] = json::array();
    for (const auto& e : rep.trapping->entries) {
      t["entries"].push_back({{"id", e.id},
                              {"power_w", e.power},
                              {"s_per_s", measured(e.s, e.s_err)},
                              {"x_in", measured(e.x_in, e.x_in_err)},
                              {"used", e.used},
                              {"note", e.note}});
    }
    j["trapping"] = t;
  } else {
    j["trapping"] = nullptr;
  }

  if (rep.r_sweep) {
    json r{{"r_best_per_s", rep.r_sweep->r_best},
           {"valid", rep.r_sweep->valid},
           {"flat_range_per_s", rep.r_sweep->flat_range ? json(*rep.r_sweep->flat_range) : json(nullptr)}};
    r["profile"] = json::array();
    for (const auto& p : rep.r_sweep->profile) {
      r["profile"].push_back(
          {{"r_per_s", p.r}, {"chi2", p.chi2}, {"n_used", p.n_used}, {"n_excluded", p.n_excluded}});
    }
    j["recombination"] = r;
  } else {
    j["recombination"] = nullptr;
  }

  json rec{{"s_per_s", fixed(rep.s_used)}, {"r_per_s", fixed(rep.r_used)}};
  rec["datasets"] = json::array();
  for (const auto& ds : rep.datasets) {
    json d{{"id", ds.id},
           {"source", to_string(ds.source)},
           {"power_w", ds.drive.power},
           {"pulse_len_s", ds.drive.pulse_len},
           {"energy_j", ds.drive.pulse_energy()},
           {"n_delays", ds.fitted.size()},
           {"truncation_index", ds.truncation_index},
           {"rejected", ds.rejected},
           {"diagnostic", ds.diagnostic}};
    if (rep.xin) {
      for (const auto& p : rep.xin->points) {
        if (p.id != ds.id) continue;
        d["x_in"] = measured(p.x_in, p.x_in_err);
        d["gamma0_per_s"] = measured(p.gamma0, p.gamma0_err);
        d["chi2_red"] = p.chi2_red;
        d["converged"] = p.converged;
        d["saturated"] = p.saturated;
      }
    }
    rec["datasets"].push_back(std::move(d));
  }
  if (rep.xin && rep.xin->low_energy_fit) {
    rec["low_energy_fit"] = linear_json(*rep.xin->low_energy_fit);
    rec["low_energy_fit"]["max_power_w"] = rep.xin->fit_max_power;
    rec["low_energy_fit"]["reference_pulse_len_s"] = rep.xin->reference_pulse_len;
  } else {
    rec["low_energy_fit"] = nullptr;
  }
  j["recovery"] = rec;

  j["cw"] = json::array();
  for (const auto& c : rep.cw) {
    json cj{{"id", c.id},
            {"position", to_string(c.position)},
            {"mu_per_w", measured(c.mu, c.mu_err)},
            {"gamma0_per_s", measured(c.gamma0, c.gamma0_err)},
            {"ratio_to_reference", measured(c.ratio_to_reference, c.ratio_to_reference_err)},
            {"collapse_max_rel_dev", c.collapse_max_rel_dev},
            {"top_decade_t2_over_2t1", c.top_decade_t2_ratio},
            {"infeasible_points", c.infeasible_points},
            {"warnings", c.warnings}};
    if (c.shift_fit) {
      cj["shift"] = {{"lambda_rad_per_s_per_w", measured(c.lambda, c.lambda_err)},
                     {"theory_slope", c.shift_theory_slope},
                     {"ratio_to_theory", measured(c.shift_ratio, c.shift_ratio_err)}};
    } else {
      cj["shift"] = nullptr;
    }
    j["cw"].push_back(std::move(cj));
  }

  if (rep.energy) {
    json e{{"n_points", rep.energy->points.size()},
           {"max_discrepancy", rep.energy->max_discrepancy ? json(*rep.energy->max_discrepancy) : json(nullptr)},
           {"warnings", rep.energy->warnings}};
    e["overlap_j"] = rep.energy->overlap
                         ? json::array({rep.energy->overlap->first, rep.energy->overlap->second})
                         : json(nullptr);
    j["energy"] = e;
  } else {
    j["energy"] = nullptr;
  }

  j["thermometry"] = json::array();
  for (const auto& t : rep.thermometry) {
    j["thermometry"].push_back({{"id", t.id},
                                {"amplitude_without_pi", t.amp_without},
                                {"amplitude_with_pi", t.amp_with},
                                {"p_e", measured(t.p_e, t.p_e_err)},
                                {"temperature_k", t.temperature},
                                {"x_thermal", t.x_thermal}});
  }
  return j;
}

std::map<std::string, std::string> figure_tables(const PipelineReport& rep) {
  std::map<std::string, std::string> out;
  const double coupling = qp_coupling(rep.device);

  if (!rep.cw.empty()) {
    Csv a("position,power_w,gamma_per_s,gamma_std_per_s,fit_gamma_per_s");
    Csv b("position,reference_power_w,gamma_per_s");
    Csv c("position,power_w,t1_s,t2_star_s,t_phi_s,t2_star_over_2t1");
    Csv d("position,power_w,dw_rad_per_s,dw_std_rad_per_s,fit_rad_per_s,theory_rad_per_s");
    for (const auto& cw : rep.cw) {
      const std::string pos(to_string(cw.position));
      for (std::size_t i = 0; i < cw.rows.size(); ++i) {
        const auto& row = cw.rows[i];
        const double gamma = 1.0 / row.t1;
        a.cell(pos).cell(row.power).cell(gamma).cell(row.t1_std / (row.t1 * row.t1))
            .cell(cw.gamma_fit.intercept + cw.gamma_fit.slope * row.power);
        a.end();
        b.cell(pos).cell(row.power * cw.ratio_to_reference).cell(gamma);
        b.end();
        const auto& dr = cw.dephasing[i];
        c.cell(pos).cell(row.power).cell(row.t1).cell(row.t2_star);
        if (dr.t_phi) {
          c.cell(*dr.t_phi);
        } else {
          c.cell(dr.feasible ? "inf" : "");
        }
        c.cell(dr.t2_over_2t1);
        c.end();
        d.cell(pos).cell(row.power).cell(row.dw).cell(row.dw_std)
            .cell(cw.shift_fit ? cw.shift_fit->intercept + cw.shift_fit->slope * row.power : 0.0)
            .cell(cw.shift_theory_slope * row.power);
        d.end();
      }
    }
    out["fig2a.csv"] = a.str();
    out["fig2b.csv"] = b.str();
    out["fig2c.csv"] = c.str();
    out["fig2d.csv"] = d.str();
  }

  if (!rep.datasets.empty()) {
    Csv t("id,delay_s,gamma_per_s,sigma_per_s,measurable,used,fit_gamma_per_s");
    for (const auto& ds : rep.datasets) {
      const XinPoint* fp = nullptr;
      if (rep.xin) {
        for (const auto& p : rep.xin->points) {
          if (p.id == ds.id) fp = &p;
        }
      }
      for (std::size_t i = 0; i < ds.fitted.size(); ++i) {
        const auto& f = ds.fitted[i];
        t.cell(ds.id).cell(f.delay).cell(f.gamma).cell(f.sigma).cell(f.measurable)
            .cell(!ds.rejected && i >= ds.truncation_index);
        if (fp) {
          t.cell(gamma_recovery_gradient(coupling, fp->x_in, fp->gamma0, rep.s_used, rep.r_used, f.delay).value);
        } else {
          t.cell("");
        }
        t.end();
      }
    }
    out["fig3b.csv"] = t.str();
  }

  if (rep.r_sweep) {
    Csv t("r_per_s,chi2_mean,n_used,n_excluded");
    for (const auto& p : rep.r_sweep->profile) {
      t.cell(p.r).cell(p.chi2).cell(p.n_used).cell(p.n_excluded);
      t.end();
    }
    out["fig3c.csv"] = t.str();
  }

  if (rep.xin) {
    Csv t("id,source,power_w,pulse_len_s,energy_j,x_in,x_in_err,saturated,linear_fit_x_in");
    for (const auto& p : rep.xin->points) {
      t.cell(p.id).cell(to_string(p.source)).cell(p.power).cell(p.pulse_len).cell(p.energy)
          .cell(p.x_in).cell(p.x_in_err).cell(p.saturated);
      if (rep.xin->low_energy_fit && rep.xin->reference_pulse_len > 0.0) {
        const double p_eq = p.energy / rep.xin->reference_pulse_len;
        t.cell(rep.xin->low_energy_fit->slope * p_eq + rep.xin->low_energy_fit->intercept);
      } else {
        t.cell("");
      }
      t.end();
    }
    out["fig3d.csv"] = t.str();
  }

  if (rep.energy) {
    Csv t("energy_j,x_in,x_in_err,source,id");
    for (const auto& p : rep.energy->points) {
      t.cell(p.energy).cell(p.x_in).cell(p.x_in_err).cell(to_string(p.source)).cell(p.id);
      t.end();
    }
    out["fig4.csv"] = t.str();
  }

  if (!rep.thermometry.empty()) {
    Csv t("id,amplitude_without_pi,amplitude_with_pi,p_e,p_e_err,temperature_k,x_thermal");
    for (const auto& r : rep.thermometry) {
      t.cell(r.id).cell(r.amp_without).cell(r.amp_with).cell(r.p_e).cell(r.p_e_err)
          .cell(r.temperature).cell(r.x_thermal);
      t.end();
    }
    out["figS7.csv"] = t.str();
  }
  return out;
}

void write_report(const std::filesystem::path& dir, const PipelineReport& rep) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "report.json", to_json(rep).dump(2) + "\n");
  for (const auto& [name, text] : figure_tables(rep)) write_file_atomic(dir / name, text);
}

}  // namespace qpdyn::report
