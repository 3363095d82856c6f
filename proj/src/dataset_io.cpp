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

#include "qpdyn/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <tuple>

#include "qpdyn/errors.hpp"
#include "qpdyn/util.hpp"

namespace qpdyn::io {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_uint(std::string_view s, std::uint64_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

void check_meta_value(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n\r") != std::string::npos ||
      value.find_first_of("\n\r") != std::string::npos) {
    throw DomainError("metadata entry '" + key + "' cannot be written to a CSV header");
  }
}

// Common structure of both CSV formats.
struct CsvDoc {
  std::map<std::string, std::string> header;
  std::map<std::string, std::size_t> header_line;
  std::vector<std::vector<std::string_view>> rows;
  std::vector<std::size_t> row_line;
  std::size_t last_line = 0;
};

CsvDoc parse_csv(std::string_view text, std::string_view columns, const std::string& label) {
  CsvDoc doc;
  bool have_columns = false;
  const std::size_t n_cols = split(columns, ',').size();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (have_columns) throw ParseError(label, line_no, "metadata line after the column header");
      const std::string_view body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos || eq == 0) {
        throw ParseError(label, line_no, "metadata line must be '# key=value'");
      }
      const std::string key(trim(body.substr(0, eq)));
      if (doc.header.count(key)) throw ParseError(label, line_no, "duplicate metadata key '" + key + "'");
      doc.header[key] = std::string(trim(body.substr(eq + 1)));
      doc.header_line[key] = line_no;
      continue;
    }
    if (!have_columns) {
      std::string joined;
      for (auto f : split(line, ',')) joined += std::string(f) + ",";
      joined.pop_back();
      if (joined != columns) {
        throw ParseError(label, line_no, "expected column header '" + std::string(columns) + "'");
      }
      have_columns = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != n_cols) {
      throw ParseError(label, line_no,
                       "expected " + std::to_string(n_cols) + " fields, found " +
                           std::to_string(fields.size()));
    }
    doc.rows.push_back(std::move(fields));
    doc.row_line.push_back(line_no);
  }
  doc.last_line = line_no;
  if (!have_columns) throw ParseError(label, line_no, "missing column header");
  return doc;
}

double field(const CsvDoc& doc, std::size_t row, std::size_t col, const std::string& label) {
  double v = 0.0;
  if (!parse_number(doc.rows[row][col], v)) {
    throw ParseError(label, doc.row_line[row],
                     "not a number: '" + std::string(doc.rows[row][col]) + "'");
  }
  return v;
}

std::string header_value(const CsvDoc& doc, const std::string& key, const std::string& label) {
  auto it = doc.header.find(key);
  if (it == doc.header.end()) throw ParseError(label, 1, "missing metadata key '" + key + "'");
  return it->second;
}

std::uint64_t header_seed(CsvDoc& doc, const std::string& label) {
  std::uint64_t seed = 0;
  auto it = doc.header.find("seed");
  if (it == doc.header.end()) return 0;
  if (!parse_uint(it->second, seed)) {
    throw ParseError(label, doc.header_line["seed"], "seed must be an unsigned integer");
  }
  doc.header.erase(it);
  return seed;
}

template <class F>
auto at_line(const std::string& label, std::size_t line, F&& fn) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(label, line, e.what());
  }
}

}  // namespace

std::string trace_to_csv(const MeasurementTrace& tr) {
  std::ostringstream os;
  os << "# protocol=" << to_string(tr.protocol) << "\n";
  os << "# seed=" << tr.seed << "\n";
  os << "# x_unit=" << tr.x_unit << "\n";
  for (const auto& [k, v] : tr.meta) {
    check_meta_value(k, v);
    if (k == "protocol" || k == "seed" || k == "x_unit") {
      throw DomainError("trace metadata uses reserved key '" + k + "'");
    }
    os << "# " << k << "=" << v << "\n";
  }
  os << kTraceColumns << "\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    os << format_double(tr.times[i]) << "," << format_double(tr.values[i]) << ","
       << format_double(tr.sigma[i]) << "\n";
  }
  return os.str();
}

MeasurementTrace trace_from_csv(std::string_view text, const std::string& label) {
  CsvDoc doc = parse_csv(text, kTraceColumns, label);
  MeasurementTrace tr;
  const std::string proto = header_value(doc, "protocol", label);
  tr.protocol = at_line(label, doc.header_line["protocol"], [&] { return parse_protocol(proto); });
  doc.header.erase("protocol");
  tr.seed = header_seed(doc, label);
  if (auto it = doc.header.find("x_unit"); it != doc.header.end()) {
    tr.x_unit = it->second;
    doc.header.erase(it);
  }
  tr.meta = doc.header;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    tr.times.push_back(field(doc, i, 0, label));
    tr.values.push_back(field(doc, i, 1, label));
    tr.sigma.push_back(field(doc, i, 2, label));
  }
  if (tr.times.empty()) throw ParseError(label, doc.last_line, "no data rows");
  at_line(label, doc.last_line, [&] { tr.validate(); return 0; });
  return tr;
}

void write_trace_csv(const std::filesystem::path& path, const MeasurementTrace& tr) {
  write_file_atomic(path, trace_to_csv(tr));
}

MeasurementTrace read_trace_csv(const std::filesystem::path& path) {
  return trace_from_csv(read_file(path), path.string());
}

std::string cw_to_csv(const CwSweep& sweep) {
  std::ostringstream os;
  os << "# id=" << sweep.id << "\n";
  os << "# seed=" << sweep.seed << "\n";
  os << "# position=" << to_string(sweep.drive.position) << "\n";
  os << "# mu_per_w=" << format_double(sweep.drive.mu) << "\n";
  os << "# lambda_shift=" << format_double(sweep.drive.lambda_shift) << "\n";
  for (const auto& [k, v] : sweep.meta) {
    check_meta_value(k, v);
    if (k == "id" || k == "seed" || k == "position" || k == "mu_per_w" || k == "lambda_shift") {
      throw DomainError("CW metadata uses reserved key '" + k + "'");
    }
    os << "# " << k << "=" << v << "\n";
  }
  os << kCwColumns << "\n";
  for (const auto& r : sweep.rows) {
    os << format_double(r.power) << "," << format_double(r.t1) << "," << format_double(r.t1_std)
       << "," << format_double(r.t2_star) << "," << format_double(r.t2_star_std) << ","
       << format_double(r.dw) << "," << format_double(r.dw_std) << "," << r.n_rep << "\n";
  }
  return os.str();
}

CwSweep cw_from_csv(std::string_view text, const std::string& label) {
  CsvDoc doc = parse_csv(text, kCwColumns, label);
  CwSweep sw;
  sw.id = header_value(doc, "id", label);
  doc.header.erase("id");
  sw.seed = header_seed(doc, label);
  const std::string pos = header_value(doc, "position", label);
  sw.drive.position = at_line(label, doc.header_line["position"], [&] { return parse_position(pos); });
  doc.header.erase("position");
  for (const char* key : {"mu_per_w", "lambda_shift"}) {
    auto it = doc.header.find(key);
    if (it == doc.header.end()) continue;
    double v = 0.0;
    if (!parse_number(it->second, v)) {
      throw ParseError(label, doc.header_line[key], std::string(key) + " must be a number");
    }
    (std::string_view(key) == "mu_per_w" ? sw.drive.mu : sw.drive.lambda_shift) = v;
    doc.header.erase(it);
  }
  sw.meta = doc.header;
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    CwRow r;
    r.power = field(doc, i, 0, label);
    r.t1 = field(doc, i, 1, label);
    r.t1_std = field(doc, i, 2, label);
    r.t2_star = field(doc, i, 3, label);
    r.t2_star_std = field(doc, i, 4, label);
    r.dw = field(doc, i, 5, label);
    r.dw_std = field(doc, i, 6, label);
    const double n = field(doc, i, 7, label);
    if (n != std::floor(n) || n < 0) throw ParseError(label, doc.row_line[i], "n_rep must be a non-negative integer");
    r.n_rep = static_cast<int>(n);
    if (!(r.t1 > 0.0) || !(r.t2_star > 0.0) || r.power < 0.0 || r.t1_std < 0.0 ||
        r.t2_star_std < 0.0 || r.dw_std < 0.0) {
      throw ParseError(label, doc.row_line[i], "times must be positive and deviations non-negative");
    }
    sw.rows.push_back(r);
  }
  if (sw.rows.empty()) throw ParseError(label, doc.last_line, "no data rows");
  return sw;
}

json to_json(const MeasurementTrace& tr) {
  return json{{"protocol", to_string(tr.protocol)},
              {"seed", tr.seed},
              {"x_unit", tr.x_unit},
              {"meta", tr.meta},
              {"t", tr.times},
              {"value", tr.values},
              {"sigma", tr.sigma}};
}

json to_json(const DeviceParams& dev) {
  return json{{"f_q_hz", dev.f_q},
              {"f_gap_hz", dev.f_gap},
              {"gamma0_per_s", dev.gamma0},
              {"gamma_ext_per_s", dev.gamma_ext}};
}

json to_json(const OpticalDrive& d) {
  return json{{"position", to_string(d.position)},
              {"power_w", d.power},
              {"pulse_len_s", d.pulse_len},
              {"mu_per_w", d.mu},
              {"lambda_shift", d.lambda_shift}};
}

namespace {

json cw_row_json(const CwRow& r) {
  return json{{"power_w", r.power},         {"t1_s", r.t1},
              {"t1_std_s", r.t1_std},       {"t2_star_s", r.t2_star},
              {"t2_star_std_s", r.t2_star_std}, {"dw_rad_per_s", r.dw},
              {"dw_std_rad_per_s", r.dw_std},   {"n_rep", r.n_rep}};
}

json run_header_json(const RecoveryRun& run) {
  return json{{"id", run.id},
              {"source", to_string(run.source)},
              {"drive", to_json(run.drive)},
              {"meta", run.meta}};
}

json cw_header_json(const CwSweep& sw) {
  return json{{"id", sw.id}, {"seed", sw.seed}, {"drive", to_json(sw.drive)}, {"meta", sw.meta}};
}

}  // namespace

json to_json(const Bundle& b) {
  json j{{"schema", kBundleSchema}, {"seed", b.seed}, {"device", to_json(b.device)}, {"meta", b.meta}};
  j["recovery"] = json::array();
  for (const auto& run : b.recovery) {
    json r = run_header_json(run);
    r["traces"] = json::array();
    for (std::size_t i = 0; i < run.traces.size(); ++i) {
      r["traces"].push_back(json{{"delay_s", run.delays[i]}, {"trace", to_json(run.traces[i])}});
    }
    j["recovery"].push_back(std::move(r));
  }
  j["cw"] = json::array();
  for (const auto& sw : b.cw) {
    json c = cw_header_json(sw);
    c["rows"] = json::array();
    for (const auto& row : sw.rows) c["rows"].push_back(cw_row_json(row));
    j["cw"].push_back(std::move(c));
  }
  j["ef_rabi"] = json::array();
  for (const auto& p : b.ef_rabi) {
    j["ef_rabi"].push_back(
        json{{"id", p.id}, {"without_pi", to_json(p.without_pi)}, {"with_pi", to_json(p.with_pi)}});
  }
  return j;
}

MeasurementTrace trace_from_json(const json& j) {
  MeasurementTrace tr;
  tr.protocol = parse_protocol(j.at("protocol").get<std::string>());
  tr.seed = j.value("seed", std::uint64_t{0});
  tr.x_unit = j.value("x_unit", std::string("s"));
  if (j.contains("meta")) tr.meta = j.at("meta").get<std::map<std::string, std::string>>();
  tr.times = j.at("t").get<std::vector<double>>();
  tr.values = j.at("value").get<std::vector<double>>();
  tr.sigma = j.at("sigma").get<std::vector<double>>();
  tr.validate();
  return tr;
}

DeviceParams device_from_json(const json& j) {
  DeviceParams d;
  d.f_q = j.value("f_q_hz", d.f_q);
  d.f_gap = j.value("f_gap_hz", d.f_gap);
  d.gamma0 = j.value("gamma0_per_s", d.gamma0);
  d.gamma_ext = j.value("gamma_ext_per_s", d.gamma_ext);
  d.validate();
  return d;
}

OpticalDrive drive_from_json(const json& j) {
  OpticalDrive d;
  d.position = parse_position(j.at("position").get<std::string>());
  d.power = j.value("power_w", 0.0);
  d.pulse_len = j.value("pulse_len_s", 0.0);
  d.mu = j.value("mu_per_w", 0.0);
  d.lambda_shift = j.value("lambda_shift", 0.0);
  return d;
}

namespace {

CwRow cw_row_from_json(const json& j) {
  CwRow r;
  r.power = j.at("power_w").get<double>();
  r.t1 = j.at("t1_s").get<double>();
  r.t1_std = j.value("t1_std_s", 0.0);
  r.t2_star = j.at("t2_star_s").get<double>();
  r.t2_star_std = j.value("t2_star_std_s", 0.0);
  r.dw = j.value("dw_rad_per_s", 0.0);
  r.dw_std = j.value("dw_std_rad_per_s", 0.0);
  r.n_rep = j.value("n_rep", 0);
  if (!(r.t1 > 0.0) || !(r.t2_star > 0.0)) throw DomainError("CW row: times must be positive");
  return r;
}

// Runs `fn`, re-throwing any failure as ParseError naming the JSON location.
template <class F>
auto in_json(const std::string& label, const std::string& where, F&& fn) {
  try {
    return fn();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(label, 0, where + ": " + e.what());
  }
}

void check_schema(const json& j, std::string_view expected, const std::string& label) {
  if (!j.is_object() || !j.contains("schema") || j["schema"] != expected) {
    throw ParseError(label, 1, "expected schema '" + std::string(expected) + "'");
  }
}

}  // namespace

json parse_json(std::string_view text, const std::string& label) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
    throw ParseError(label, line, "invalid JSON");
  }
}

Bundle bundle_from_json(const json& j, const std::string& label) {
  check_schema(j, kBundleSchema, label);
  Bundle b;
  b.seed = in_json(label, "/seed", [&] { return j.value("seed", std::uint64_t{0}); });
  b.device = in_json(label, "/device", [&] { return device_from_json(j.at("device")); });
  if (j.contains("meta")) {
    b.meta = in_json(label, "/meta", [&] { return j["meta"].get<std::map<std::string, std::string>>(); });
  }
  const json empty = json::array();
  const json& rec = j.contains("recovery") ? j["recovery"] : empty;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const std::string where = "/recovery/" + std::to_string(i);
    b.recovery.push_back(in_json(label, where, [&] {
      const json& r = rec[i];
      RecoveryRun run;
      run.id = r.at("id").get<std::string>();
      run.source = parse_sweep_source(r.at("source").get<std::string>());
      run.drive = drive_from_json(r.at("drive"));
      if (r.contains("meta")) run.meta = r["meta"].get<std::map<std::string, std::string>>();
      for (const auto& t : r.at("traces")) {
        run.delays.push_back(t.at("delay_s").get<double>());
        run.traces.push_back(trace_from_json(t.at("trace")));
      }
      return run;
    }));
  }
  const json& cw = j.contains("cw") ? j["cw"] : empty;
  for (std::size_t i = 0; i < cw.size(); ++i) {
    b.cw.push_back(in_json(label, "/cw/" + std::to_string(i), [&] {
      const json& c = cw[i];
      CwSweep sw;
      sw.id = c.at("id").get<std::string>();
      sw.seed = c.value("seed", std::uint64_t{0});
      sw.drive = drive_from_json(c.at("drive"));
      if (c.contains("meta")) sw.meta = c["meta"].get<std::map<std::string, std::string>>();
      for (const auto& row : c.at("rows")) sw.rows.push_back(cw_row_from_json(row));
      return sw;
    }));
  }
  const json& ef = j.contains("ef_rabi") ? j["ef_rabi"] : empty;
  for (std::size_t i = 0; i < ef.size(); ++i) {
    b.ef_rabi.push_back(in_json(label, "/ef_rabi/" + std::to_string(i), [&] {
      return EfRabiPair{ef[i].at("id").get<std::string>(), trace_from_json(ef[i].at("without_pi")),
                        trace_from_json(ef[i].at("with_pi"))};
    }));
  }
  return b;
}

void write_bundle_json(const std::filesystem::path& path, const Bundle& b) {
  write_file_atomic(path, to_json(b).dump(1) + "\n");
}

Bundle read_bundle_json(const std::filesystem::path& path) {
  const std::string label = path.string();
  return bundle_from_json(parse_json(read_file(path), label), label);
}

void write_bundle_dir(const std::filesystem::path& dir, const Bundle& b, const json& extra) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json m{{"schema", kManifestSchema}, {"seed", b.seed}, {"device", to_json(b.device)}, {"meta", b.meta}};
  m["recovery"] = json::array();
  for (const auto& run : b.recovery) {
    json r = run_header_json(run);
    r["traces"] = json::array();
    for (std::size_t i = 0; i < run.traces.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "t1_%03zu.csv", i);
      const fs::path rel = fs::path("recovery") / run.id / name;
      fs::create_directories(dir / rel.parent_path());
      write_trace_csv(dir / rel, run.traces[i]);
      r["traces"].push_back(json{{"delay_s", run.delays[i]}, {"file", rel.generic_string()}});
    }
    m["recovery"].push_back(std::move(r));
  }
  m["cw"] = json::array();
  for (const auto& sw : b.cw) {
    const fs::path rel = fs::path("cw") / (sw.id + ".csv");
    fs::create_directories(dir / "cw");
    write_file_atomic(dir / rel, cw_to_csv(sw));
    json c = cw_header_json(sw);
    c["file"] = rel.generic_string();
    m["cw"].push_back(std::move(c));
  }
  m["ef_rabi"] = json::array();
  for (const auto& p : b.ef_rabi) {
    fs::create_directories(dir / "ef_rabi");
    const fs::path w = fs::path("ef_rabi") / (p.id + "_without_pi.csv");
    const fs::path v = fs::path("ef_rabi") / (p.id + "_with_pi.csv");
    write_trace_csv(dir / w, p.without_pi);
    write_trace_csv(dir / v, p.with_pi);
    m["ef_rabi"].push_back(json{{"id", p.id}, {"without_pi", w.generic_string()}, {"with_pi", v.generic_string()}});
  }
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_file_atomic(dir / "manifest.json", m.dump(1) + "\n");
}

Bundle read_bundle_dir(const std::filesystem::path& dir, bool lenient) {
  const auto mpath = dir / "manifest.json";
  const std::string label = mpath.string();
  const json m = parse_json(read_file(mpath), label);
  check_schema(m, kManifestSchema, label);
  Bundle b;
  b.seed = in_json(label, "/seed", [&] { return m.value("seed", std::uint64_t{0}); });
  b.device = in_json(label, "/device", [&] { return device_from_json(m.at("device")); });
  if (m.contains("meta")) {
    b.meta = in_json(label, "/meta", [&] { return m["meta"].get<std::map<std::string, std::string>>(); });
  }
  auto skip = [&](const std::string& what, const std::exception& e) {
    if (!lenient) throw;
    b.warnings.push_back("skipped " + what + ": " + e.what());
  };
  const json empty = json::array();
  const json& rec = m.contains("recovery") ? m["recovery"] : empty;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const json& r = rec[i];
    RecoveryRun run = in_json(label, "/recovery/" + std::to_string(i), [&] {
      RecoveryRun out;
      out.id = r.at("id").get<std::string>();
      out.source = parse_sweep_source(r.at("source").get<std::string>());
      out.drive = drive_from_json(r.at("drive"));
      if (r.contains("meta")) out.meta = r["meta"].get<std::map<std::string, std::string>>();
      return out;
    });
    const json& traces = in_json(label, "/recovery/" + std::to_string(i), [&]() -> const json& {
      return r.at("traces");
    });
    for (std::size_t k = 0; k < traces.size(); ++k) {
      const auto [delay, file] = in_json(label, "/recovery/" + std::to_string(i) + "/traces/" + std::to_string(k), [&] {
        return std::pair(traces[k].at("delay_s").get<double>(), traces[k].at("file").get<std::string>());
      });
      try {
        run.traces.push_back(read_trace_csv(dir / file));
        run.delays.push_back(delay);
      } catch (const std::exception& e) {
        skip("trace " + file, e);
      }
    }
    b.recovery.push_back(std::move(run));
  }
  const json& cw = m.contains("cw") ? m["cw"] : empty;
  for (std::size_t i = 0; i < cw.size(); ++i) {
    const std::string file = in_json(label, "/cw/" + std::to_string(i), [&] {
      return cw[i].at("file").get<std::string>();
    });
    try {
      CwSweep sw = cw_from_csv(read_file(dir / file), (dir / file).string());
      b.cw.push_back(std::move(sw));
    } catch (const std::exception& e) {
      skip("CW sweep " + file, e);
    }
  }
  const json& ef = m.contains("ef_rabi") ? m["ef_rabi"] : empty;
  for (std::size_t i = 0; i < ef.size(); ++i) {
    const auto [id, w, v] = in_json(label, "/ef_rabi/" + std::to_string(i), [&] {
      return std::tuple(ef[i].at("id").get<std::string>(), ef[i].at("without_pi").get<std::string>(),
                        ef[i].at("with_pi").get<std::string>());
    });
    try {
      b.ef_rabi.push_back(EfRabiPair{id, read_trace_csv(dir / w), read_trace_csv(dir / v)});
    } catch (const std::exception& e) {
      skip("e-f Rabi pair " + id, e);
    }
  }
  return b;
}

Bundle load_bundle(const std::filesystem::path& path, bool lenient) {
  if (std::filesystem::is_directory(path)) return read_bundle_dir(path, lenient);
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("bundle not found: " + path.string());
  }
  return read_bundle_json(path);
}

}  // namespace qpdyn::io
