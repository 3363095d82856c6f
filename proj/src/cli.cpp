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

#include "qpdyn/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qpdyn/config.hpp"
#include "qpdyn/dataset_io.hpp"
#include "qpdyn/errors.hpp"
#include "qpdyn/fit.hpp"
#include "qpdyn/imaging.hpp"
#include "qpdyn/pipeline.hpp"
#include "qpdyn/report.hpp"
#include "qpdyn/synth.hpp"
#include "qpdyn/util.hpp"

namespace qpdyn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<unsigned> threads;
  bool verbose = false;
};

// Human-readable number for terminal output.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig resolve_config(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.threads) cfg.threads = std::max(1u, *g.threads);
  return cfg;
}

json manifest_extra(const RunConfig& cfg, std::string_view protocol) {
  return json{{"seed", cfg.seed}, {"config_hash", config_hash(cfg)}, {"protocol", protocol}};
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string protocol = "bundle";
  std::string position = "A";
  std::optional<double> power;
};

const std::vector<std::string> kSimProtocols = {"bundle", "recovery", "pulselen", "cw",
                                                "efrabi", "t1",       "ramsey"};

int cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out) {
  if (std::find(kSimProtocols.begin(), kSimProtocols.end(), a.protocol) == kSimProtocols.end()) {
    throw UsageError("unknown protocol '" + a.protocol + "'");
  }
  const BeamPosition pos = [&] {
    try {
      return parse_position(a.position);
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
  }();
  const RunConfig cfg = resolve_config(g);
  synth::BundleSpec spec = cfg.bundle_spec();
  const fs::path dir = cfg.out_dir;
  const auto mu_at = [&](BeamPosition p) {
    auto it = spec.mu_cw.find(p);
    return it == spec.mu_cw.end() ? 0.0 : it->second;
  };

  if (a.protocol == "t1" || a.protocol == "ramsey") {
    const double power = a.power.value_or(0.0);
    const double x = mu_at(pos) * power;
    MeasurementTrace tr;
    std::string name;
    if (a.protocol == "t1") {
      tr = synth::gen_t1_trace(spec.device, x, spec.t1_grid, spec.noise, cfg.seed);
      name = "t1_trace.csv";
    } else {
      const double t1 = 1.0 / decay_rate(spec.device, x);
      const double t2 = compose_t2_star(t1, spec.cw.t_phi);
      const auto grid = linspace(0.0, 3.0 * t2, spec.cw.ramsey_points);
      tr = synth::gen_ramsey_trace(spec.device, x, t2, spec.cw.detune, grid, spec.noise, cfg.seed,
                                   spec.cw.slope_scale);
      name = "ramsey_trace.csv";
    }
    tr.meta["position"] = std::string(to_string(pos));
    tr.meta["power_w"] = format_double(power);
    fs::create_directories(dir);
    io::write_trace_csv(dir / name, tr);
    json m = manifest_extra(cfg, a.protocol);
    m["schema"] = io::kManifestSchema;
    m["files"] = json::array({name});
    write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
    out << "wrote " << (dir / name).string() << "\n";
    return kExitOk;
  }

  if (a.protocol != "bundle") {
    const bool keep_cw = a.protocol == "cw";
    std::vector<double> cw_powers;
    if (keep_cw) {
      cw_powers = a.power ? std::vector<double>(linspace(0.0, *a.power, 11))
                          : spec.cw_powers.count(pos) ? spec.cw_powers.at(pos) : std::vector<double>{};
    }
    spec.cw_powers.clear();
    if (keep_cw) spec.cw_powers[pos] = cw_powers;
    if (a.protocol != "efrabi") spec.temperature = 0.0;
    spec.pulse_position = pos;
    spec.recovery_powers.clear();
    spec.pulse_lengths.clear();
    if (a.protocol == "recovery") spec.recovery_powers = {a.power.value_or(1e-6)};
    if (a.protocol == "pulselen") {
      spec.pulse_lengths = synth::golden_spec().pulse_lengths;
      spec.length_sweep_power = a.power.value_or(spec.length_sweep_power);
    }
  }
  const Bundle b = synth::make_bundle(spec, cfg.threads);
  io::write_bundle_dir(dir, b, manifest_extra(cfg, a.protocol));
  out << "wrote bundle to " << dir.string() << " (" << b.recovery.size() << " recovery runs, "
      << b.cw.size() << " cw sweeps, " << b.ef_rabi.size() << " e-f pairs)\n";
  return kExitOk;
}

// ---- fit ------------------------------------------------------------------

const std::vector<std::string> kFitModels = {"exponential", "ramsey", "linear"};

json fit_result_json(const fit::FitResult& r, const std::vector<std::string>& names) {
  json p = json::object();
  for (std::size_t i = 0; i < names.size() && i < r.params.size(); ++i) {
    p[names[i]] = {{"value", r.params[i]}, {"error", r.stderr_[i]}};
  }
  return json{{"params", p},
              {"chi2", r.chi2},
              {"dof", r.dof},
              {"chi2_red", r.reduced_chi2()},
              {"converged", r.converged},
              {"n_iter", r.n_iter}};
}

json fit_one(const fs::path& file, const std::string& model, const RunConfig& cfg) {
  const MeasurementTrace tr = io::read_trace_csv(file);
  json j{{"file", file.string()}, {"model", model}};
  if (model == "exponential") {
    fit::ExponentialOptions opt;
    opt.float_offset = cfg.pipeline.float_exp_offset;
    opt.max_rel_err = cfg.pipeline.max_rel_rate_error;
    opt.cfg = cfg.pipeline.fit;
    const auto f = fit::fit_exponential(tr, opt);
    j.update(fit_result_json(f.result, {"amplitude", "gamma_per_s", "offset"}));
    j["gamma_per_s"] = {{"value", f.gamma}, {"error", f.gamma_err}};
    j["flagged"] = f.flagged;
  } else if (model == "ramsey") {
    const auto f = fit::fit_ramsey(tr, cfg.pipeline.fit);
    j.update(fit_result_json(f.result, {"amplitude", "t2_star_s", "detune_hz", "phase", "offset"}));
    j["t2_star_s"] = {{"value", f.t2_star}, {"error", f.t2_star_err}};
    j["detune_hz"] = {{"value", f.detune}, {"error", f.detune_err}};
  } else {
    const auto f = fit::fit_linear_weighted(tr.times, tr.values, tr.sigma);
    j.update(fit_result_json(f.result, {"slope", "intercept"}));
  }
  return j;
}

int cmd_fit(const Globals& g, const std::string& model, const std::vector<std::string>& inputs,
            std::ostream& out, std::ostream& err) {
  if (std::find(kFitModels.begin(), kFitModels.end(), model) == kFitModels.end()) {
    throw UsageError("unknown model '" + model + "'");
  }
  const RunConfig cfg = resolve_config(g);
  const fs::path out_dir = cfg.out_dir;

  // (input file, output path relative to out_dir)
  std::vector<std::pair<fs::path, fs::path>> jobs;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      for (const auto& f : found) {
        jobs.emplace_back(f, fs::path(p.filename()) / fs::relative(f, p).replace_extension(".json"));
      }
    } else if (fs::exists(p)) {
      jobs.emplace_back(p, fs::path(p.filename()).replace_extension(".json"));
    } else {
      err << "error: " << in << ": no such file or directory\n";
      return kExitFailure;
    }
  }
  if (jobs.empty()) {
    err << "error: no CSV files found\n";
    return kExitFailure;
  }

  std::vector<std::optional<json>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    try {
      results[i] = fit_one(jobs[i].first, model, cfg);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  int status = kExitOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!results[i]) {
      err << "error: " << errors[i] << "\n";
      status = kExitFailure;
      continue;
    }
    const fs::path dest = out_dir / jobs[i].second;
    fs::create_directories(dest.parent_path());
    write_file_atomic(dest, results[i]->dump(2) + "\n");
    out << jobs[i].first.string() << " -> " << dest.string();
    if (model == "exponential") {
      out << "  gamma = " << num((*results[i])["gamma_per_s"]["value"].get<double>())
          << " +- " << num((*results[i])["gamma_per_s"]["error"].get<double>()) << " 1/s";
    }
    out << "\n";
  }
  return status;
}

// ---- pipeline -------------------------------------------------------------

std::string timestamp_from_env() {
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  return epoch ? std::string("epoch:") + epoch : std::string();
}

int cmd_pipeline(const Globals& g, const std::string& bundle_path,
                 const std::optional<std::vector<double>>& r_grid, std::ostream& out,
                 std::ostream& err) {
  RunConfig cfg = resolve_config(g);
  if (r_grid) {
    for (double r : *r_grid) {
      if (!(r >= 0.0)) throw ConfigError("--r-grid values must be non-negative");
    }
    cfg.pipeline.r_grid = *r_grid;
  }
  cfg.pipeline.threads = cfg.threads;

  Bundle bundle;
  pipeline::Provenance prov;
  prov.config_hash = config_hash(cfg);
  prov.timestamp = timestamp_from_env();
  if (bundle_path.empty()) {
    bundle = synth::make_bundle(cfg.bundle_spec(), cfg.threads);
    prov.bundle_source = "generated";
  } else {
    bundle = io::load_bundle(bundle_path);
    prov.bundle_source = bundle_path;
  }
  prov.seed = bundle_path.empty() ? cfg.seed : bundle.seed;

  const auto rep = pipeline::run_full(bundle, cfg.pipeline, prov);
  report::write_report(cfg.out_dir, rep);

  for (const auto& s : rep.stages) {
    out << s.name << ": " << to_string(s.status) << "\n";
    if (g.verbose || s.status == pipeline::StageStatus::Failed) {
      for (const auto& m : s.messages) (s.status == pipeline::StageStatus::Failed ? err : out) << "  " << m << "\n";
    }
  }
  if (rep.trapping) {
    out << "s = " << num(rep.trapping->summary.mean) << " +- "
        << num(rep.trapping->summary.std) << " 1/s\n";
  }
  out << "r = " << num(rep.r_used) << " 1/s\n";
  out << "report written to " << (fs::path(cfg.out_dir) / "report.json").string() << "\n";
  return rep.ok() ? kExitOk : kExitFailure;
}

// ---- image ----------------------------------------------------------------

json point_json(const imaging::Point& p) { return json{{"x_m", p.x}, {"y_m", p.y}}; }

int cmd_image(const Globals& g, bool no_pad, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(g);
  if (no_pad) cfg.scene.pad = false;
  const auto scene = cfg.scene.geometry();
  const auto img = imaging::raster_image(scene, cfg.scene.beam, cfg.scene.grid, cfg.threads);
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  write_file_atomic(dir / "image.csv", imaging::image_to_csv(img));
  write_file_atomic(dir / "image.pgm", imaging::image_to_pgm(img));
  out << "wrote " << (dir / "image.csv").string() << " and " << (dir / "image.pgm").string() << "\n";

  imaging::Features f;
  try {
    f = imaging::locate_features(img, cfg.scene.threshold);
  } catch (const FeatureExtractionError& e) {
    err << "error: feature extraction failed: " << e.what() << "\n";
    return kExitFailure;
  }
  const double len = imaging::pad_diffusion_length(scene);
  const double td = diffusion_time(len, cfg.scene.diffusion_const);
  json j{{"threshold", f.threshold},
         {"pad", {{"center", point_json({f.pad.cx, f.pad.cy})},
                  {"width_m", f.pad.width},
                  {"height_m", f.pad.height}}},
         {"wall_edges_m", f.wall_edges},
         {"positions", {{"A", point_json(f.a)}, {"B", point_json(f.b)}, {"C", point_json(f.c)}}},
         {"diffusion", {{"length_m", len},
                        {"diff_const_m2_per_s", cfg.scene.diffusion_const},
                        {"time_s", td},
                        {"trapping_negligible", trapping_negligible(td, cfg.bundle.dyn.s)}}}};
  write_file_atomic(dir / "features.json", j.dump(2) + "\n");
  out << "A = (" << num(f.a.x) << ", " << num(f.a.y) << ") m\n"
      << "B = (" << num(f.b.x) << ", " << num(f.b.y) << ") m\n"
      << "C = (" << num(f.c.x) << ", " << num(f.c.y) << ") m\n";
  return kExitOk;
}

// ---- report ---------------------------------------------------------------

std::string value_text(const json& v) {
  if (v.is_null()) return "n/a";
  if (v.is_object() && v.contains("value")) {
    std::string s = num(v["value"].get<double>());
    if (v.contains("error")) s += " +- " + num(v["error"].get<double>());
    return s;
  }
  if (v.is_number()) return num(v.get<double>());
  return v.dump();
}

int cmd_report(const Globals& g, const std::string& path, std::ostream& out) {
  const json j = io::parse_json(read_file(path), path);
  if (j.value("schema", "") != report::kReportSchema) {
    throw ParseError(path, 0, "not a report (schema '" + j.value("schema", "") + "')");
  }
  std::ostringstream s;
  s << "report " << path << " (ok: " << (j.at("ok").get<bool>() ? "yes" : "no") << ")\n";
  for (const auto& st : j.at("stages")) {
    s << "  " << st.at("name").get<std::string>() << ": " << st.at("status").get<std::string>() << "\n";
    if (g.verbose) {
      for (const auto& m : st.at("messages")) s << "    " << m.get<std::string>() << "\n";
    }
  }
  if (!j.at("trapping").is_null()) s << "trapping s [1/s]: " << value_text(j["trapping"]["s_per_s"]) << "\n";
  if (!j.at("recombination").is_null()) {
    s << "recombination r_best [1/s]: " << value_text(j["recombination"]["r_best_per_s"])
      << ", flat to " << value_text(j["recombination"]["flat_range_per_s"]) << "\n";
  }
  for (const auto& c : j.at("cw")) {
    s << "cw " << c.at("position").get<std::string>() << ": mu [1/W] " << value_text(c["mu_per_w"])
      << ", ratio " << value_text(c["ratio_to_reference"]) << "\n";
  }
  if (!j.at("energy").is_null()) s << "energy discrepancy: " << value_text(j["energy"]["max_discrepancy"]) << "\n";
  for (const auto& t : j.at("thermometry")) {
    s << "thermometry " << t.at("id").get<std::string>() << ": p_e " << value_text(t["p_e"]) << ", T [K] "
      << value_text(t["temperature_k"]) << "\n";
  }
  out << s.str();
  if (!g.out_dir.empty()) {
    fs::create_directories(g.out_dir);
    write_file_atomic(fs::path(g.out_dir) / "summary.txt", s.str());
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quasiparticle dynamics toolkit: simulation, fitting, analysis and beam imaging"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  app.add_option("--config", g.config_path, "INI configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--out", g.out_dir, "Output directory");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--verbose,-v", g.verbose, "Print stage messages");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic datasets");
  simulate->add_option("--protocol", sim.protocol, "bundle|recovery|pulselen|cw|efrabi|t1|ramsey");
  simulate->add_option("--position", sim.position, "Beam position A|B|C");
  auto* power_opt = simulate->add_option("--power", "Optical power, W")->check(CLI::NonNegativeNumber);

  std::string model = "exponential";
  std::vector<std::string> fit_inputs;
  auto* fitcmd = app.add_subcommand("fit", "Fit trace CSV files (directories recurse)");
  fitcmd->add_option("--model", model, "exponential|ramsey|linear");
  fitcmd->add_option("inputs", fit_inputs, "Files or directories")->required();

  std::string bundle_path;
  std::vector<double> r_grid;
  auto* pipe = app.add_subcommand("pipeline", "Run the full analysis on a bundle");
  pipe->add_option("bundle", bundle_path, "Bundle directory or JSON; generated from config if omitted");
  auto* rgrid_opt = pipe->add_option("--r-grid", r_grid, "Recombination grid, 1/s")->delimiter(',');

  bool no_pad = false;
  auto* image = app.add_subcommand("image", "Raster a beam scan and locate A/B/C");
  image->add_flag("--no-pad", no_pad, "Scene without the qubit pad");

  std::string report_path;
  auto* rep = app.add_subcommand("report", "Summarize a report JSON");
  rep->add_option("report", report_path, "report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }
  if (*seed_opt) g.seed = seed;
  if (*threads_opt) g.threads = threads;
  if (*power_opt) sim.power = power_opt->as<double>();

  try {
    if (*simulate) return cmd_simulate(g, sim, out);
    if (*fitcmd) return cmd_fit(g, model, fit_inputs, out, err);
    if (*pipe) {
      return cmd_pipeline(g, bundle_path, *rgrid_opt ? std::optional(r_grid) : std::nullopt, out, err);
    }
    if (*image) return cmd_image(g, no_pad, out, err);
    if (*rep) return cmd_report(g, report_path, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, const char* const* argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace qpdyn::cli
