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

// Serialization of a PipelineReport: one JSON document (schema
// "qpdyn-report/1", described in docs/formats.md) plus plot-ready CSV tables.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "qpdyn/pipeline.hpp"

namespace qpdyn::report {

inline constexpr std::string_view kReportSchema = "qpdyn-report/1";

nlohmann::json to_json(const pipeline::PipelineReport& rep);

/// File name -> CSV text for every figure table the report supports.
std::map<std::string, std::string> figure_tables(const pipeline::PipelineReport& rep);

/// Writes report.json and the figure tables into `dir`.
void write_report(const std::filesystem::path& dir, const pipeline::PipelineReport& rep);

}  // namespace qpdyn::report
