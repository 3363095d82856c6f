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

// Raster-scan transmission imaging of the qubit chip through the cavity
// aperture, and extraction of the beam positions A, B and C from an image.
//
// Coordinates are in metres with y pointing up. Images are stored row-major
// with row 0 at the smallest y.

#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace qpdyn::imaging {

/// Opaque full-height band x in [x_lo, x_hi] (either end may be infinite).
struct WallBand {
  double x_lo = 0.0;
  double x_hi = 0.0;
};

struct Rect {
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;
  double height = 0.0;

  double x_lo() const { return cx - 0.5 * width; }
  double x_hi() const { return cx + 0.5 * width; }
  double y_lo() const { return cy - 0.5 * height; }
  double y_hi() const { return cy + 0.5 * height; }
};

struct Disk {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
};

struct SceneGeometry {
  std::vector<WallBand> walls;
  std::optional<Rect> pad;
  std::optional<Disk> antenna;  // off in the default scene

  /// Throws DomainError unless dimensions are positive, the occluders are
  /// pairwise disjoint and the pad sits in the open aperture.
  void validate() const;
  /// 0.5 mm aperture centred on x = 0 with a 350 x 300 um pad at the origin.
  static SceneGeometry default_scene();
};

/// Length used for the diffusion-time estimate: the pad's shorter side.
double pad_diffusion_length(const SceneGeometry& scene);

struct BeamSpec {
  double waist = 47e-6;  // 1/e^2 intensity radius, m
  double power = 1.0;    // relative; recorded with the image only

  void validate() const;
  double sigma() const { return 0.5 * waist; }  // per-axis standard deviation
};

/// Fraction of the beam passing the scene when centred at (x, y).
double transmission_at(const SceneGeometry& scene, const BeamSpec& beam, double x, double y);

/// Pixel-centre grid; coordinates are symmetric about the span midpoint.
struct GridSpec {
  double x_min = -400e-6;
  double x_max = 400e-6;
  std::size_t nx = 161;
  double y_min = -450e-6;
  double y_max = 300e-6;
  std::size_t ny = 151;

  void validate() const;
  double x(std::size_t i) const;
  double y(std::size_t j) const;
  double dx() const { return (x_max - x_min) / static_cast<double>(nx - 1); }
  double dy() const { return (y_max - y_min) / static_cast<double>(ny - 1); }
};

struct Image {
  GridSpec grid;
  std::vector<double> data;  // data[j * nx + i] at (x(i), y(j))

  double at(std::size_t i, std::size_t j) const { return data[j * grid.nx + i]; }
};

Image raster_image(const SceneGeometry& scene, const BeamSpec& beam, const GridSpec& grid,
                   unsigned threads = 1);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Features {
  double threshold = 0.5;
  Rect pad;                       // recovered bounding box
  std::vector<double> wall_edges; // inner edge x of each wall band, ascending
  Point a;                        // pad centre
  Point b;                        // middle of the lower pad edge
  Point c;                        // offset_c below B
};

inline constexpr double kOffsetC = 200e-6;

/// Thresholds the image, labels dark regions, and classifies full-height
/// regions as walls and the single remaining region as the pad. Throws
/// FeatureExtractionError for blank images or zero/multiple pad candidates.
Features locate_features(const Image& img, double threshold = 0.5);

std::string image_to_csv(const Image& img);
/// Binary 16-bit graymap, top row at the largest y.
std::string image_to_pgm(const Image& img);

}  // namespace qpdyn::imaging
