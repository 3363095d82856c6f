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

#include "qpdyn/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qpdyn/errors.hpp"
#include "qpdyn/util.hpp"

namespace qpdyn::imaging {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Probability that a centred normal variable with deviation sigma lies in [lo, hi].
double interval_mass(double lo, double hi, double sigma) {
  const double k = 1.0 / (sigma * std::numbers::sqrt2);
  return 0.5 * (std::erf(hi * k) - std::erf(lo * k));
}

bool disk_hits_rect(const Disk& d, double x_lo, double x_hi, double y_lo, double y_hi) {
  const double dx = std::max({x_lo - d.cx, 0.0, d.cx - x_hi});
  const double dy = std::max({y_lo - d.cy, 0.0, d.cy - y_hi});
  return dx * dx + dy * dy < d.radius * d.radius;
}

double disk_mass(const Disk& d, double sigma, double x, double y) {
  const double inv = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  auto f = [&](double theta) {
    const double half = d.radius * std::cos(theta);
    const double u = d.cx + d.radius * std::sin(theta) - x;
    const double px = inv * std::exp(-0.5 * u * u / (sigma * sigma));
    return px * interval_mass(d.cy - half - y, d.cy + half - y, sigma) * half;
  };
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(f, -0.5 * std::numbers::pi, 0.5 * std::numbers::pi, 15,
                                              1e-12);
}

}  // namespace

void SceneGeometry::validate() const {
  for (std::size_t i = 0; i < walls.size(); ++i) {
    const auto& w = walls[i];
    if (!(w.x_lo < w.x_hi)) throw DomainError("scene: wall band must have x_lo < x_hi");
    for (std::size_t k = i + 1; k < walls.size(); ++k) {
      if (w.x_lo < walls[k].x_hi && walls[k].x_lo < w.x_hi) {
        throw DomainError("scene: wall bands overlap");
      }
    }
    if (pad && pad->x_lo() < w.x_hi && w.x_lo < pad->x_hi()) {
      throw DomainError("scene: pad must lie inside the open aperture");
    }
    if (antenna && disk_hits_rect(*antenna, w.x_lo, w.x_hi, -kInf, kInf)) {
      throw DomainError("scene: antenna overlaps a wall");
    }
  }
  if (pad && !(pad->width > 0.0 && pad->height > 0.0)) {
    throw DomainError("scene: pad dimensions must be positive");
  }
  if (antenna) {
    if (!(antenna->radius > 0.0)) throw DomainError("scene: antenna radius must be positive");
    if (pad && disk_hits_rect(*antenna, pad->x_lo(), pad->x_hi(), pad->y_lo(), pad->y_hi())) {
      throw DomainError("scene: antenna overlaps the pad");
    }
  }
}

SceneGeometry SceneGeometry::default_scene() {
  SceneGeometry s;
  s.walls = {{-kInf, -250e-6}, {250e-6, kInf}};
  s.pad = Rect{0.0, 0.0, 350e-6, 300e-6};
  return s;
}

double pad_diffusion_length(const SceneGeometry& scene) {
  if (!scene.pad) throw DomainError("scene has no pad");
  return std::min(scene.pad->width, scene.pad->height);
}

void BeamSpec::validate() const {
  if (!(waist > 0.0)) throw DomainError("beam: waist must be positive");
  if (!(power > 0.0)) throw DomainError("beam: power must be positive");
}

double transmission_at(const SceneGeometry& scene, const BeamSpec& beam, double x, double y) {
  const double sigma = beam.sigma();
  double blocked = 0.0;
  for (const auto& w : scene.walls) blocked += interval_mass(w.x_lo - x, w.x_hi - x, sigma);
  if (scene.pad) {
    const Rect& p = *scene.pad;
    blocked += interval_mass(p.x_lo() - x, p.x_hi() - x, sigma) *
               interval_mass(p.y_lo() - y, p.y_hi() - y, sigma);
  }
  if (scene.antenna) blocked += disk_mass(*scene.antenna, sigma, x, y);
  return std::clamp(1.0 - blocked, 0.0, 1.0);
}

void GridSpec::validate() const {
  if (nx < 2 || ny < 2) throw DomainError("grid: need at least 2 pixels per axis");
  if (!(x_min < x_max) || !(y_min < y_max)) throw DomainError("grid: empty span");
}

double GridSpec::x(std::size_t i) const {
  return 0.5 * (x_min + x_max) + (static_cast<double>(i) - 0.5 * static_cast<double>(nx - 1)) * dx();
}

double GridSpec::y(std::size_t j) const {
  return 0.5 * (y_min + y_max) + (static_cast<double>(j) - 0.5 * static_cast<double>(ny - 1)) * dy();
}

Image raster_image(const SceneGeometry& scene, const BeamSpec& beam, const GridSpec& grid,
                   unsigned threads) {
  scene.validate();
  beam.validate();
  grid.validate();
  Image img{grid, std::vector<double>(grid.nx * grid.ny)};
  parallel_for(grid.ny, threads, [&](std::size_t j) {
    const double y = grid.y(j);
    for (std::size_t i = 0; i < grid.nx; ++i) {
      img.data[j * grid.nx + i] = transmission_at(scene, beam, grid.x(i), y);
    }
  });
  return img;
}

namespace {

struct Component {
  std::size_t i_min, i_max, j_min, j_max;
  std::size_t n = 0;
  double sum_i = 0.0, sum_j = 0.0;
  std::vector<bool> rows;  // rows touched
};

// Position where the profile crosses `thr` between samples at a and b.
double crossing(double pa, double va, double pb, double vb, double thr) {
  if (va == vb) return 0.5 * (pa + pb);
  return pa + (thr - va) / (vb - va) * (pb - pa);
}

std::string describe(const Component& c, const GridSpec& g) {
  std::ostringstream os;
  os << "[x " << g.x(c.i_min) * 1e6 << ".." << g.x(c.i_max) * 1e6 << " um, y "
     << g.y(c.j_min) * 1e6 << ".." << g.y(c.j_max) * 1e6 << " um, " << c.n << " px]";
  return os.str();
}

}  // namespace

Features locate_features(const Image& img, double threshold) {
  const GridSpec& g = img.grid;
  g.validate();
  if (img.data.size() != g.nx * g.ny) throw DomainError("image: data size does not match grid");
  const std::size_t nx = g.nx, ny = g.ny;
  std::vector<int> label(nx * ny, -1);
  std::vector<Component> comps;
  std::vector<std::size_t> queue;
  for (std::size_t start = 0; start < nx * ny; ++start) {
    if (label[start] >= 0 || !(img.data[start] < threshold)) continue;
    const int id = static_cast<int>(comps.size());
    Component c{nx, 0, ny, 0, 0, 0.0, 0.0, std::vector<bool>(ny, false)};
    queue.assign(1, start);
    label[start] = id;
    while (!queue.empty()) {
      const std::size_t k = queue.back();
      queue.pop_back();
      const std::size_t i = k % nx, j = k / nx;
      c.i_min = std::min(c.i_min, i);
      c.i_max = std::max(c.i_max, i);
      c.j_min = std::min(c.j_min, j);
      c.j_max = std::max(c.j_max, j);
      c.rows[j] = true;
      c.sum_i += static_cast<double>(i);
      c.sum_j += static_cast<double>(j);
      ++c.n;
      auto visit = [&](std::size_t kk) {
        if (label[kk] < 0 && img.data[kk] < threshold) {
          label[kk] = id;
          queue.push_back(kk);
        }
      };
      if (i > 0) visit(k - 1);
      if (i + 1 < nx) visit(k + 1);
      if (j > 0) visit(k - nx);
      if (j + 1 < ny) visit(k + nx);
    }
    comps.push_back(std::move(c));
  }
  if (comps.empty()) throw FeatureExtractionError("no region below threshold: blank image");

  std::vector<std::size_t> walls, pads;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const bool full_height = std::all_of(comps[k].rows.begin(), comps[k].rows.end(), [](bool b) { return b; });
    (full_height ? walls : pads).push_back(k);
  }
  if (pads.size() != 1) {
    std::string msg = "expected exactly one pad region, found " + std::to_string(pads.size());
    for (auto k : pads) msg += " " + describe(comps[k], g);
    if (pads.empty()) msg += " (" + std::to_string(walls.size()) + " wall band(s) present)";
    throw FeatureExtractionError(msg);
  }
  const Component& pc = comps[pads.front()];
  const int pid = static_cast<int>(pads.front());
  if (pc.i_min == 0 || pc.j_min == 0 || pc.i_max + 1 == nx || pc.j_max + 1 == ny) {
    throw FeatureExtractionError("pad region touches the image border " + describe(pc, g));
  }
  const auto ic = static_cast<std::size_t>(std::lround(pc.sum_i / static_cast<double>(pc.n)));
  const auto jc = static_cast<std::size_t>(std::lround(pc.sum_j / static_cast<double>(pc.n)));
  auto is_pad = [&](std::size_t i, std::size_t j) { return label[j * nx + i] == pid; };
  if (!is_pad(ic, jc)) throw FeatureExtractionError("pad region is not convex " + describe(pc, g));

  std::size_t l = ic, r = ic, b = jc, t = jc;
  while (is_pad(l - 1, jc)) --l;
  while (is_pad(r + 1, jc)) ++r;
  while (is_pad(ic, b - 1)) --b;
  while (is_pad(ic, t + 1)) ++t;
  Features f;
  f.threshold = threshold;
  const double x_lo = crossing(g.x(l - 1), img.at(l - 1, jc), g.x(l), img.at(l, jc), threshold);
  const double x_hi = crossing(g.x(r), img.at(r, jc), g.x(r + 1), img.at(r + 1, jc), threshold);
  const double y_lo = crossing(g.y(b - 1), img.at(ic, b - 1), g.y(b), img.at(ic, b), threshold);
  const double y_hi = crossing(g.y(t), img.at(ic, t), g.y(t + 1), img.at(ic, t + 1), threshold);
  f.pad = Rect{0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi), x_hi - x_lo, y_hi - y_lo};
  f.a = {f.pad.cx, f.pad.cy};
  f.b = {f.pad.cx, y_lo};
  f.c = {f.b.x, f.b.y - kOffsetC};

  for (auto k : walls) {
    const int wid = static_cast<int>(k);
    for (std::size_t i = 0; i < nx; ++i) {
      if (label[jc * nx + i] != wid) continue;
      if (i > 0 && label[jc * nx + i - 1] != wid) {
        f.wall_edges.push_back(crossing(g.x(i - 1), img.at(i - 1, jc), g.x(i), img.at(i, jc), threshold));
      }
      if (i + 1 < nx && label[jc * nx + i + 1] != wid) {
        f.wall_edges.push_back(crossing(g.x(i), img.at(i, jc), g.x(i + 1), img.at(i + 1, jc), threshold));
      }
    }
  }
  std::sort(f.wall_edges.begin(), f.wall_edges.end());
  return f;
}

std::string image_to_csv(const Image& img) {
  const GridSpec& g = img.grid;
  std::ostringstream os;
  os << "# x_min=" << format_double(g.x_min) << "\n# x_max=" << format_double(g.x_max)
     << "\n# nx=" << g.nx << "\n# y_min=" << format_double(g.y_min)
     << "\n# y_max=" << format_double(g.y_max) << "\n# ny=" << g.ny
     << "\n# row_order=ascending_y\n";
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      if (i) os << ',';
      os << format_double(img.at(i, j));
    }
    os << '\n';
  }
  return os.str();
}

std::string image_to_pgm(const Image& img) {
  const GridSpec& g = img.grid;
  std::string out = "P5\n" + std::to_string(g.nx) + " " + std::to_string(g.ny) + "\n65535\n";
  for (std::size_t jj = 0; jj < g.ny; ++jj) {
    const std::size_t j = g.ny - 1 - jj;
    for (std::size_t i = 0; i < g.nx; ++i) {
      const auto v = static_cast<unsigned>(std::lround(std::clamp(img.at(i, j), 0.0, 1.0) * 65535.0));
      out.push_back(static_cast<char>(v >> 8));
      out.push_back(static_cast<char>(v & 0xff));
    }
  }
  return out;
}

}  // namespace qpdyn::imaging
