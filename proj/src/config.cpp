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

#include "qpdyn/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qpdyn/errors.hpp"
#include "qpdyn/util.hpp"

namespace qpdyn {

namespace {

// SI value of one configuration unit.
constexpr double kGHz = 1e9, kkHz = 1e3, kMHz = 1e6, knW = 1e-9, kus = 1e-6, kns = 1e-9,
                 kmK = 1e-3, kum = 1e-6;
constexpr double kPerNw = 1e9;   // 1/nW in 1/W
constexpr double kPerPj = 1e12;  // 1/pJ in 1/J

struct Field {
  std::string section;
  std::string key;
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

double to_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("not a finite number: '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t to_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("not a non-negative integer: '" + std::string(s) + "'");
  }
  return v;
}

bool to_bool(std::string_view s) {
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError("not a boolean: '" + std::string(s) + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t") - b + 1));
}

std::vector<double> to_list(std::string_view s, double unit) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(to_double(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start))) * unit);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string from_list(const std::vector<double>& v, double unit) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i] / unit);
  return out;
}

class Registry {
 public:
  void num(const std::string& sec, const std::string& key, double& ref, double unit = 1.0) {
    add(sec, key, [&ref, unit](std::string_view s) { ref = to_double(s) * unit; },
        [&ref, unit] { return format_double(ref / unit); });
  }
  void count(const std::string& sec, const std::string& key, std::size_t& ref) {
    add(sec, key, [&ref](std::string_view s) { ref = static_cast<std::size_t>(to_uint(s)); },
        [&ref] { return std::to_string(ref); });
  }
  void integer(const std::string& sec, const std::string& key, int& ref) {
    add(sec, key,
        [&ref](std::string_view s) {
          const auto v = to_uint(s);
          if (v > 1000000000ULL) throw ConfigError("value too large");
          ref = static_cast<int>(v);
        },
        [&ref] { return std::to_string(ref); });
  }
  void u64(const std::string& sec, const std::string& key, std::uint64_t& ref) {
    add(sec, key, [&ref](std::string_view s) { ref = to_uint(s); },
        [&ref] { return std::to_string(ref); });
  }
  void flag(const std::string& sec, const std::string& key, bool& ref) {
    add(sec, key, [&ref](std::string_view s) { ref = to_bool(s); },
        [&ref] { return std::string(ref ? "true" : "false"); });
  }
  void list(const std::string& sec, const std::string& key, std::vector<double>& ref, double unit = 1.0) {
    add(sec, key, [&ref, unit](std::string_view s) { ref = to_list(s, unit); },
        [&ref, unit] { return from_list(ref, unit); });
  }
  void position(const std::string& sec, const std::string& key, BeamPosition& ref) {
    add(sec, key,
        [&ref](std::string_view s) {
          try {
            ref = parse_position(s);
          } catch (const std::exception& e) {
            throw ConfigError(e.what());
          }
        },
        [&ref] { return std::string(to_string(ref)); });
  }
  void add(std::string sec, std::string key, std::function<void(std::string_view)> set,
           std::function<std::string()> get) {
    fields_.push_back({std::move(sec), std::move(key), std::move(set), std::move(get)});
  }

  const std::vector<Field>& fields() const { return fields_; }
  const Field* find(const std::string& sec, const std::string& key) const {
    for (const auto& f : fields_) {
      if (f.section == sec && f.key == key) return &f;
    }
    return nullptr;
  }
  bool has_section(const std::string& sec) const {
    for (const auto& f : fields_) {
      if (f.section == sec) return true;
    }
    return false;
  }

 private:
  std::vector<Field> fields_;
};

// Binds every configuration key to its storage in `c`. `g_in` receives an
// explicit generation rate, which is resolved after all keys are read.
Registry bind(RunConfig& c, std::optional<double>& g_in) {
  Registry r;
  r.u64("run", "seed", c.seed);
  r.add("run", "out_dir", [&c](std::string_view s) { c.out_dir = std::string(s); },
        [&c] { return c.out_dir; });
  r.add("run", "threads",
        [&c](std::string_view s) {
          const auto v = to_uint(s);
          if (v == 0 || v > 1024) throw ConfigError("threads must be in 1..1024");
          c.threads = static_cast<unsigned>(v);
        },
        [&c] { return std::to_string(c.threads); });

  auto& b = c.bundle;
  r.num("device", "f_q_ghz", b.device.f_q, kGHz);
  r.num("device", "f_gap_ghz", b.device.f_gap, kGHz);
  r.num("device", "gamma0_per_s", b.device.gamma0);
  r.num("device", "gamma_ext_per_s", b.device.gamma_ext);

  r.num("dynamics", "s_khz", b.dyn.s, kkHz);
  r.num("dynamics", "r_mhz", b.dyn.r, kMHz);
  r.num("dynamics", "x0", b.dyn.x0);
  r.add("dynamics", "g_per_s", [&g_in](std::string_view s) { g_in = to_double(s); },
        [&b] { return format_double(b.dyn.s * b.dyn.x0 + b.dyn.r * b.dyn.x0 * b.dyn.x0); });

  for (BeamPosition pos : {BeamPosition::A, BeamPosition::B, BeamPosition::C}) {
    const std::string sec = "drive." + std::string(to_string(pos));
    b.mu_cw.try_emplace(pos, 0.0);
    b.lambda_shift.try_emplace(pos, 0.0);
    r.num(sec, "mu_per_nw", b.mu_cw[pos], kPerNw);
    r.num(sec, "lambda_rad_per_s_per_nw", b.lambda_shift[pos], kPerNw);
  }

  r.position("pulse", "position", b.pulse_position);
  r.num("pulse", "length_us", b.pulse_len, kus);
  r.num("pulse", "mu_per_pj", b.energy_map.mu_pulse, kPerPj);
  r.add("pulse", "map",
        [&b](std::string_view s) {
          if (s == "linear") {
            b.energy_map.kind = synth::EnergyMap::Kind::Linear;
          } else if (s == "piecewise") {
            b.energy_map.kind = synth::EnergyMap::Kind::Piecewise;
          } else {
            throw ConfigError("map must be 'linear' or 'piecewise'");
          }
        },
        [&b] {
          return std::string(b.energy_map.kind == synth::EnergyMap::Kind::Linear ? "linear" : "piecewise");
        });
  r.num("pulse", "plateau_start_pj", b.energy_map.plateau_start, 1e-12);
  r.num("pulse", "plateau_end_pj", b.energy_map.plateau_end, 1e-12);
  r.num("pulse", "mu_after_per_pj", b.energy_map.mu_after, kPerPj);

  r.list("recovery", "powers_nw", b.recovery_powers, knW);
  r.list("recovery", "lengths_us", b.pulse_lengths, kus);
  r.num("recovery", "length_sweep_power_nw", b.length_sweep_power, knW);
  r.num("recovery", "delay_min_us", c.delay_min, kus);
  r.num("recovery", "delay_max_us", c.delay_max, kus);
  r.count("recovery", "delay_points", c.delay_points);
  r.num("recovery", "t1_min_ns", c.t1_min, kns);
  r.num("recovery", "t1_max_us", c.t1_max, kus);
  r.count("recovery", "t1_points", c.t1_points);

  r.list("cw", "reference_powers_nw", c.cw_reference_powers, knW);
  r.integer("cw", "repeats", b.cw.repeats);
  r.num("cw", "t_phi_us", b.cw.t_phi, kus);
  r.num("cw", "detune_mhz", b.cw.detune, kMHz);
  r.num("cw", "slope_scale", b.cw.slope_scale);
  r.count("cw", "t1_points", b.cw.t1_points);
  r.count("cw", "ramsey_points", b.cw.ramsey_points);

  r.num("noise", "sigma_read", b.noise.sigma_read);
  r.integer("noise", "n_avg", b.noise.n_avg);
  r.flag("noise", "enabled", b.noise.enabled);

  r.num("thermometry", "temperature_mk", b.temperature, kmK);
  r.count("thermometry", "rabi_points", c.rabi_points);
  r.num("thermometry", "rabi_max_amplitude", c.rabi_max_amplitude);

  auto& p = c.pipeline;
  r.num("pipeline", "low_power_threshold_nw", p.low_power_threshold, knW);
  r.num("pipeline", "low_power_xin_limit", p.low_power_xin_limit);
  r.list("pipeline", "r_grid_mhz", p.r_grid, kMHz);
  r.num("pipeline", "r_grid_min_mhz", p.r_grid_min, kMHz);
  r.num("pipeline", "r_grid_max_mhz", p.r_grid_max, kMHz);
  r.count("pipeline", "r_grid_points", p.r_grid_points);
  r.num("pipeline", "truncation_slack_sigma", p.truncation_slack);
  r.flag("pipeline", "allow_single_point_suffix", p.allow_single_point_suffix);
  r.num("pipeline", "max_rel_rate_error", p.max_rel_rate_error);
  r.num("pipeline", "variance_floor", p.variance_floor);
  r.num("pipeline", "linear_fit_max_power_nw", p.linear_fit_max_power, knW);
  r.num("pipeline", "saturation_sigma", p.saturation_sigma);
  r.num("pipeline", "max_exclusion_fraction", p.max_exclusion_fraction);
  r.num("pipeline", "chi2_flat_factor", p.chi2_flat_factor);
  r.flag("pipeline", "float_exp_offset", p.float_exp_offset);
  r.position("pipeline", "reference_position", p.reference_position);
  r.num("pipeline", "shift_prefactor", p.shift_prefactor);

  r.integer("fit", "max_iter", p.fit.max_iter);
  r.num("fit", "grad_tol", p.fit.grad_tol);
  r.num("fit", "step_tol", p.fit.step_tol);
  r.num("fit", "damping_init", p.fit.damping_init);
  r.num("fit", "damping_up", p.fit.damping_up);
  r.num("fit", "damping_down", p.fit.damping_down);

  auto& s = c.scene;
  r.num("scene", "aperture_center_um", s.aperture_center, kum);
  r.num("scene", "aperture_width_um", s.aperture_width, kum);
  r.flag("scene", "pad", s.pad);
  r.num("scene", "pad_center_x_um", s.pad_rect.cx, kum);
  r.num("scene", "pad_center_y_um", s.pad_rect.cy, kum);
  r.num("scene", "pad_width_um", s.pad_rect.width, kum);
  r.num("scene", "pad_height_um", s.pad_rect.height, kum);
  r.flag("scene", "antenna", s.antenna);
  r.num("scene", "antenna_x_um", s.antenna_disk.cx, kum);
  r.num("scene", "antenna_y_um", s.antenna_disk.cy, kum);
  r.num("scene", "antenna_radius_um", s.antenna_disk.radius, kum);
  r.num("scene", "waist_um", s.beam.waist, kum);
  r.num("scene", "beam_power", s.beam.power);
  r.num("scene", "x_min_um", s.grid.x_min, kum);
  r.num("scene", "x_max_um", s.grid.x_max, kum);
  r.count("scene", "nx", s.grid.nx);
  r.num("scene", "y_min_um", s.grid.y_min, kum);
  r.num("scene", "y_max_um", s.grid.y_max, kum);
  r.count("scene", "ny", s.grid.ny);
  r.num("scene", "threshold", s.threshold);
  r.num("scene", "diffusion_const_m2_per_s", s.diffusion_const);
  return r;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate(const RunConfig& c) {
  check(c.delay_points >= 2 && c.delay_min > 0.0 && c.delay_max > c.delay_min,
        "[recovery] delay grid needs delay_points >= 2 and 0 < delay_min < delay_max");
  check(c.t1_points >= 2 && c.t1_min > 0.0 && c.t1_max > c.t1_min,
        "[recovery] T1 grid needs t1_points >= 2 and 0 < t1_min < t1_max");
  check(c.bundle.noise.n_avg > 0 && c.bundle.noise.sigma_read >= 0.0, "[noise] n_avg must be positive");
  check(c.bundle.pulse_len > 0.0, "[pulse] length_us must be positive");
  check(c.bundle.energy_map.mu_pulse > 0.0, "[pulse] mu_per_pj must be positive");
  check(c.pipeline.r_grid_points == 0 || (c.pipeline.r_grid_min > 0.0 && c.pipeline.r_grid_max > c.pipeline.r_grid_min),
        "[pipeline] r grid needs 0 < r_grid_min < r_grid_max");
  for (double r : c.pipeline.r_grid) check(r >= 0.0, "[pipeline] r_grid_mhz entries must be >= 0");
  check(c.pipeline.truncation_slack >= 0.0, "[pipeline] truncation_slack_sigma must be >= 0");
  check(c.pipeline.variance_floor > 0.0, "[pipeline] variance_floor must be positive");
  check(c.scene.threshold > 0.0 && c.scene.threshold < 1.0, "[scene] threshold must be in (0, 1)");
  check(c.scene.diffusion_const > 0.0, "[scene] diffusion_const_m2_per_s must be positive");
  try {
    c.bundle.device.validate();
    c.bundle.dyn.validate(1e-9);
    c.pipeline.fit.validate(0);
    c.scene.beam.validate();
    c.scene.grid.validate();
    c.scene.geometry().validate();
    for (double p : c.bundle.recovery_powers) check(p > 0.0, "[recovery] powers must be positive");
    for (double t : c.bundle.pulse_lengths) check(t > 0.0, "[recovery] lengths must be positive");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

imaging::SceneGeometry SceneConfig::geometry() const {
  imaging::SceneGeometry g;
  const double inf = std::numeric_limits<double>::infinity();
  g.walls = {{-inf, aperture_center - 0.5 * aperture_width}, {aperture_center + 0.5 * aperture_width, inf}};
  if (pad) g.pad = pad_rect;
  if (antenna) g.antenna = antenna_disk;
  return g;
}

RunConfig::RunConfig() {
  cw_reference_powers.push_back(0.0);
  for (double p : geomspace(20e-9, 2e-6, 11)) cw_reference_powers.push_back(p);
}

synth::BundleSpec RunConfig::bundle_spec() const {
  synth::BundleSpec spec = bundle;
  spec.seed = seed;
  spec.delays = linspace(delay_min, delay_max, delay_points);
  spec.t1_grid = {0.0};
  for (double t : geomspace(t1_min, t1_max, t1_points)) spec.t1_grid.push_back(t);
  spec.rabi_amplitudes = rabi_points >= 2 ? linspace(0.0, rabi_max_amplitude, rabi_points)
                                          : std::vector<double>{};
  spec.cw_powers.clear();
  const double mu_ref = spec.mu_cw.count(BeamPosition::C) ? spec.mu_cw.at(BeamPosition::C) : 0.0;
  for (const auto& [pos, mu] : spec.mu_cw) {
    if (!(mu > 0.0) || !(mu_ref > 0.0) || cw_reference_powers.empty()) continue;
    std::vector<double> grid;
    for (double p : cw_reference_powers) grid.push_back(p * mu_ref / mu);
    spec.cw_powers[pos] = grid;
  }
  return spec;
}

RunConfig parse_config(std::string_view text, const std::string& label) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is{std::string(text)};
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(label + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  std::optional<double> g_in;
  const Registry reg = bind(cfg, g_in);
  bool x0_given = false;
  for (const auto& [sec, node] : tree) {
    if (node.empty()) {
      if (!node.data().empty()) throw ConfigError(label + ": key '" + sec + "' outside a section");
      if (!reg.has_section(sec)) throw ConfigError(label + ": unknown section [" + sec + "]");
      continue;
    }
    if (!reg.has_section(sec)) throw ConfigError(label + ": unknown section [" + sec + "]");
    for (const auto& [key, value] : node) {
      const Field* f = reg.find(sec, key);
      if (!f) throw ConfigError(label + ": unknown key '" + key + "' in [" + sec + "]");
      try {
        f->set(trim(value.data()));
      } catch (const std::exception& e) {
        throw ConfigError(label + ": [" + sec + "] " + key + ": " + e.what());
      }
      if (sec == "dynamics" && key == "x0") x0_given = true;
    }
  }
  auto& dyn = cfg.bundle.dyn;
  if (g_in) {
    const double g = *g_in;
    if (g < 0.0) throw ConfigError(label + ": [dynamics] g_per_s must be >= 0");
    // Stationary density: positive root of r x^2 + s x - g = 0.
    const double x0 = dyn.r > 0.0 ? 2.0 * g / (dyn.s + std::sqrt(dyn.s * dyn.s + 4.0 * dyn.r * g))
                                  : (dyn.s > 0.0 ? g / dyn.s : 0.0);
    if (x0_given && std::abs(x0 - dyn.x0) > 1e-9 * std::max(x0, 1e-300)) {
      throw ConfigError(label + ": [dynamics] x0 and g_per_s disagree");
    }
    dyn.x0 = x0;
  }
  dyn = QpDynamics::with_steady_state(dyn.s, dyn.r, dyn.x0, 0.0);
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(label + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string());
}

std::string canonical_config(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  std::optional<double> unused;
  const Registry reg = bind(cfg, unused);
  std::string out;
  std::string current;
  for (const auto& f : reg.fields()) {
    if (f.section != current) {
      out += (current.empty() ? "" : "\n") + std::string("[") + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get() + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = canonical_config(cfg);
  const auto pos = text.find("\n[", text.find("[run]"));
  return hex64(fnv1a64(pos == std::string::npos ? text : text.substr(pos)));
}

}  // namespace qpdyn
