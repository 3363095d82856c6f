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

// On-disk dataset formats.
//
// Trace CSV: `# key=value` metadata lines (protocol, seed, x_unit, then free
// metadata), a `t,value,sigma` column header, then one row per point.
// CW CSV: same layout with the sweep columns listed in kCwColumns.
// A bundle is either one JSON document or a directory holding manifest.json
// plus one CSV per trace/sweep. The schema is described in docs/formats.md.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "qpdyn/bundle.hpp"
#include "qpdyn/trace.hpp"

namespace qpdyn::io {

inline constexpr std::string_view kTraceColumns = "t,value,sigma";
inline constexpr std::string_view kCwColumns =
    "power_w,t1_s,t1_std_s,t2_star_s,t2_star_std_s,dw_rad_per_s,dw_std_rad_per_s,n_rep";
inline constexpr std::string_view kBundleSchema = "qpdyn-bundle/1";
inline constexpr std::string_view kManifestSchema = "qpdyn-bundle-dir/1";

std::string trace_to_csv(const MeasurementTrace& tr);
/// `label` names the source in ParseError messages.
MeasurementTrace trace_from_csv(std::string_view text, const std::string& label);
void write_trace_csv(const std::filesystem::path& path, const MeasurementTrace& tr);
MeasurementTrace read_trace_csv(const std::filesystem::path& path);

std::string cw_to_csv(const CwSweep& sweep);
CwSweep cw_from_csv(std::string_view text, const std::string& label);

nlohmann::json to_json(const MeasurementTrace& tr);
nlohmann::json to_json(const DeviceParams& dev);
nlohmann::json to_json(const OpticalDrive& drive);
nlohmann::json to_json(const Bundle& b);
MeasurementTrace trace_from_json(const nlohmann::json& j);
DeviceParams device_from_json(const nlohmann::json& j);
OpticalDrive drive_from_json(const nlohmann::json& j);
Bundle bundle_from_json(const nlohmann::json& j, const std::string& label);

void write_bundle_json(const std::filesystem::path& path, const Bundle& b);
Bundle read_bundle_json(const std::filesystem::path& path);

/// Writes manifest.json and the per-trace CSVs. `extra` keys are merged into
/// the manifest (config hash, seed, ...).
void write_bundle_dir(const std::filesystem::path& dir, const Bundle& b,
                      const nlohmann::json& extra = nlohmann::json::object());

/// Reads a directory bundle. With `lenient`, unreadable trace or sweep files
/// are skipped and recorded in Bundle::warnings instead of throwing.
Bundle read_bundle_dir(const std::filesystem::path& dir, bool lenient = true);

/// Directory or JSON file, chosen by what `path` is.
Bundle load_bundle(const std::filesystem::path& path, bool lenient = true);

/// Parses JSON text, mapping syntax errors to ParseError with a line number.
nlohmann::json parse_json(std::string_view text, const std::string& label);

}  // namespace qpdyn::io
