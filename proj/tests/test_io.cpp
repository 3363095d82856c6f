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

#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "qpdyn/dataset_io.hpp"
#include "qpdyn/errors.hpp"
#include "qpdyn/synth.hpp"
#include "qpdyn/util.hpp"

using namespace qpdyn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qpdyn_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

synth::BundleSpec tiny_spec() {
  auto spec = synth::golden_spec();
  spec.recovery_powers = {50e-9};
  spec.pulse_lengths = {1e-6};
  spec.delays = linspace(10e-6, 1e-3, 5);
  for (auto& [pos, p] : spec.cw_powers) p.resize(3);
  spec.cw.repeats = 2;
  spec.rabi_amplitudes = linspace(0.0, 2.0, 9);
  return spec;
}

void check_same(const Bundle& a, const Bundle& b) {
  CHECK(a.seed == b.seed);
  CHECK(a.device.f_q == b.device.f_q);
  REQUIRE(a.recovery.size() == b.recovery.size());
  for (std::size_t i = 0; i < a.recovery.size(); ++i) {
    CHECK(a.recovery[i].id == b.recovery[i].id);
    CHECK(a.recovery[i].source == b.recovery[i].source);
    CHECK(a.recovery[i].drive.power == b.recovery[i].drive.power);
    CHECK(a.recovery[i].delays == b.recovery[i].delays);
    REQUIRE(a.recovery[i].traces.size() == b.recovery[i].traces.size());
    for (std::size_t k = 0; k < a.recovery[i].traces.size(); ++k) {
      CHECK(a.recovery[i].traces[k].values == b.recovery[i].traces[k].values);
      CHECK(a.recovery[i].traces[k].times == b.recovery[i].traces[k].times);
    }
  }
  REQUIRE(a.cw.size() == b.cw.size());
  for (std::size_t i = 0; i < a.cw.size(); ++i) {
    CHECK(a.cw[i].drive.mu == b.cw[i].drive.mu);
    REQUIRE(a.cw[i].rows.size() == b.cw[i].rows.size());
    for (std::size_t k = 0; k < a.cw[i].rows.size(); ++k) {
      CHECK(a.cw[i].rows[k].t1 == b.cw[i].rows[k].t1);
      CHECK(a.cw[i].rows[k].dw == b.cw[i].rows[k].dw);
    }
  }
  REQUIRE(a.ef_rabi.size() == b.ef_rabi.size());
  CHECK(a.ef_rabi[0].with_pi.values == b.ef_rabi[0].with_pi.values);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("trace csv round trip is exact") {
  auto tr = synth::gen_t1_trace_at_rate(1.234e5, synth::default_t1_grid(), NoiseModel{}, 77);
  tr.meta["note"] = "hello";
  const auto back = io::trace_from_csv(io::trace_to_csv(tr), "mem");
  CHECK(back.values == tr.values);
  CHECK(back.times == tr.times);
  CHECK(back.sigma == tr.sigma);
  CHECK(back.seed == 77);
  CHECK(back.protocol == Protocol::T1Decay);
  CHECK(back.meta.at("note") == "hello");
}

TEST_CASE("csv layout has a metadata header then columns") {
  const auto tr = synth::gen_t1_trace_at_rate(1e5, linspace(0.0, 1e-5, 3), NoiseModel{}, 1);
  const std::string text = io::trace_to_csv(tr);
  CHECK(text.rfind("# ", 0) == 0);
  CHECK(text.find("\n" + std::string(io::kTraceColumns) + "\n") != std::string::npos);
}

TEST_CASE("corrupted csv reports file and line") {
  const auto tr = synth::gen_t1_trace_at_rate(1e5, linspace(0.0, 1e-5, 4), NoiseModel{}, 1);
  std::string text = io::trace_to_csv(tr);
  const auto last = text.rfind('\n', text.size() - 2);
  text = text.substr(0, last + 1) + "1e-5,abc,0.01\n";
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  try {
    io::trace_from_csv(text, "bad.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.file() == "bad.csv");
    CHECK(e.line() == lines);
  }
  CHECK_THROWS_AS(io::trace_from_csv("# protocol=T1Decay\nfoo,bar\n1,2\n", "x"), ParseError);
  CHECK_THROWS_AS(io::trace_from_csv("# protocol=T1Decay\n# protocol=T1Decay\nt,value,sigma\n", "x"),
                  ParseError);
}

TEST_CASE("cw csv round trip") {
  CwSweep sw;
  sw.id = "cw_A";
  sw.drive.position = BeamPosition::A;
  sw.drive.mu = 1.75e3;
  sw.rows = {CwRow{0.0, 1e-5, 1e-7, 1.5e-5, 1e-7, 0.0, 10.0, 10},
             CwRow{1e-8, 9e-6, 1e-7, 1.4e-5, 1e-7, -1234.5, 10.0, 9}};
  const auto back = io::cw_from_csv(io::cw_to_csv(sw), "cw.csv");
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].dw == -1234.5);
  CHECK(back.rows[1].n_rep == 9);
  CHECK(back.drive.position == BeamPosition::A);
}

TEST_CASE("bundle json and directory round trips") {
  const Bundle b = synth::make_bundle(tiny_spec());
  const auto j = io::to_json(b);
  check_same(b, io::bundle_from_json(j, "mem"));

  const auto dir = scratch("dir");
  io::write_bundle_dir(dir / "bundle", b, nlohmann::json{{"config_hash", "abc"}});
  CHECK(fs::exists(dir / "bundle" / "manifest.json"));
  const Bundle back = io::load_bundle(dir / "bundle", false);
  check_same(b, back);
  CHECK(back.warnings.empty());

  io::write_bundle_json(dir / "b.json", b);
  check_same(b, io::load_bundle(dir / "b.json"));
}

TEST_CASE("lenient directory load skips damaged files") {
  const Bundle b = synth::make_bundle(tiny_spec());
  const auto dir = scratch("lenient");
  io::write_bundle_dir(dir, b);
  fs::path victim;
  for (const auto& e : fs::recursive_directory_iterator(dir / "recovery")) {
    if (e.path().extension() == ".csv") {
      victim = e.path();
      break;
    }
  }
  REQUIRE(!victim.empty());
  std::ofstream(victim) << "garbage\n";
  const Bundle back = io::load_bundle(dir, true);
  CHECK_FALSE(back.warnings.empty());
  CHECK_THROWS_AS(io::load_bundle(dir, false), ParseError);
}

TEST_CASE("missing bundle and bad json") {
  CHECK_THROWS(io::load_bundle("/nonexistent/qpdyn/bundle"));
  try {
    io::parse_json("{\n \"a\": 1,\n \"b\": }\n", "bad.json");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(io::bundle_from_json(nlohmann::json{{"schema", "other"}}, "x"), ParseError);
}

}
