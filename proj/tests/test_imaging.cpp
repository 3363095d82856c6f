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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "qpdyn/errors.hpp"
#include "qpdyn/imaging.hpp"

using namespace qpdyn;
using namespace qpdyn::imaging;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SceneGeometry half_plane() {
  SceneGeometry s;
  s.walls = {WallBand{-kInf, 0.0}};
  return s;
}

// Bisection for the beam position where the transmission crosses `level`.
double crossing(const SceneGeometry& s, const BeamSpec& b, double level) {
  double lo = -500e-6, hi = 500e-6;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (transmission_at(s, b, mid, 0.0) < level ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_SUITE("imaging") {

TEST_CASE("half-plane edge transmits half the beam") {
  const BeamSpec beam;
  CHECK(std::abs(transmission_at(half_plane(), beam, 0.0, 0.0) - 0.5) <= 1e-6);
  for (double d : {-60e-6, -20e-6, 10e-6, 45e-6}) {
    CHECK(transmission_at(half_plane(), beam, d, 0.0) ==
          doctest::Approx(oracle::half_plane_transmission(d, beam.sigma())).epsilon(1e-9));
  }
}

TEST_CASE("knife-edge 10-90 width") {
  const BeamSpec beam;
  const double w = crossing(half_plane(), beam, 0.9) - crossing(half_plane(), beam, 0.1);
  CHECK(w == doctest::Approx(oracle::knife_edge_width_10_90(beam.waist)).epsilon(1e-6));
  CHECK(w == doctest::Approx(1.2816 * beam.waist).epsilon(1e-4));
}

TEST_CASE("transmission is bounded and the antenna blocks light") {
  auto scene = SceneGeometry::default_scene();
  const BeamSpec beam;
  CHECK(transmission_at(scene, beam, 0.0, 0.0) < 1e-6);
  CHECK(transmission_at(scene, beam, 0.0, -300e-6) == doctest::Approx(1.0).epsilon(1e-4));
  scene.antenna = Disk{0.0, -380e-6, 100e-6};
  CHECK(transmission_at(scene, beam, 0.0, -380e-6) < 1e-3);
  for (double x = -300e-6; x <= 300e-6; x += 37e-6) {
    const double t = transmission_at(scene, beam, x, -100e-6);
    CHECK(t >= 0.0);
    CHECK(t <= 1.0 + 1e-12);
  }
}

TEST_CASE("scene validation") {
  auto scene = SceneGeometry::default_scene();
  CHECK_NOTHROW(scene.validate());
  scene.pad = Rect{240e-6, 0.0, 100e-6, 100e-6};  // overlaps the wall
  CHECK_THROWS_AS(scene.validate(), DomainError);
  CHECK(pad_diffusion_length(SceneGeometry::default_scene()) == doctest::Approx(300e-6));
}

TEST_CASE("feature round trip on the default scene") {
  const auto scene = SceneGeometry::default_scene();
  const GridSpec grid;
  const auto img = raster_image(scene, BeamSpec{}, grid, 2);
  const auto f = locate_features(img);
  CHECK(std::abs(f.a.x - scene.pad->cx) <= grid.dx());
  CHECK(std::abs(f.a.y - scene.pad->cy) <= grid.dy());
  CHECK(std::abs(f.b.y - scene.pad->y_lo()) <= grid.dy());
  CHECK(f.c.x == f.b.x);
  CHECK(std::abs((f.b.y - f.c.y) - kOffsetC) <= 1e-12);
  REQUIRE(f.wall_edges.size() == 2);
  CHECK(f.wall_edges[0] == doctest::Approx(-250e-6).epsilon(0.02));
}

TEST_CASE("shifted pad is tracked") {
  auto scene = SceneGeometry::default_scene();
  scene.pad = Rect{30e-6, -20e-6, 200e-6, 150e-6};
  const GridSpec grid;
  const auto f = locate_features(raster_image(scene, BeamSpec{}, grid));
  CHECK(std::abs(f.a.x - 30e-6) <= grid.dx());
  CHECK(std::abs(f.a.y + 20e-6) <= grid.dy());
}

TEST_CASE("missing pad and blank images are errors") {
  auto scene = SceneGeometry::default_scene();
  scene.pad.reset();
  CHECK_THROWS_AS(locate_features(raster_image(scene, BeamSpec{}, GridSpec{})), FeatureExtractionError);
  SceneGeometry open;
  CHECK_THROWS_AS(locate_features(raster_image(open, BeamSpec{}, GridSpec{})), FeatureExtractionError);
}

TEST_CASE("symmetric scene gives a mirror-symmetric image") {
  const GridSpec grid;
  const auto img = raster_image(SceneGeometry::default_scene(), BeamSpec{}, grid);
  for (std::size_t j = 0; j < grid.ny; j += 7) {
    for (std::size_t i = 0; i < grid.nx; ++i) {
      CHECK(std::abs(img.at(i, j) - img.at(grid.nx - 1 - i, j)) <= 1e-12);
    }
  }
  CHECK(grid.x(0) == -grid.x(grid.nx - 1));
}

TEST_CASE("image serializations") {
  GridSpec grid;
  grid.nx = 5;
  grid.ny = 4;
  const auto img = raster_image(SceneGeometry::default_scene(), BeamSpec{}, grid);
  const auto csv = image_to_csv(img);
  std::size_t rows = 0;
  for (char ch : csv) rows += ch == '\n';
  CHECK(rows >= grid.ny);
  const auto pgm = image_to_pgm(img);
  CHECK(pgm.rfind("P5", 0) == 0);
  CHECK(pgm.size() > grid.nx * grid.ny * 2);
}

}
