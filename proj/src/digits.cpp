#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "mtda/data.hpp"
#include "mtda/errors.hpp"
#include "mtda/rng.hpp"

namespace mtda {

namespace {

struct Point {
  double x, y;
};
using Stroke = std::vector<Point>;
using Glyph = std::vector<Stroke>;

Stroke ellipse(double cx, double cy, double rx, double ry, int segments = 16) {
  Stroke s;
  for (int i = 0; i <= segments; ++i) {
    const double t = 2.0 * std::numbers::pi * i / segments;
    s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return s;
}

Glyph rotate180(Glyph g) {
  for (auto& s : g)
    for (auto& p : s) p = {1.0 - p.x, 1.0 - p.y};
  return g;
}

// Glyphs on the unit square, y pointing down.
const std::array<Glyph, 10>& glyphs() {
  static const std::array<Glyph, 10> g = [] {
    std::array<Glyph, 10> out;
    out[0] = {ellipse(0.5, 0.5, 0.22, 0.34)};
    out[1] = {{{0.38, 0.27}, {0.52, 0.15}, {0.52, 0.85}}};
    out[2] = {{{0.28, 0.3}, {0.35, 0.18}, {0.5, 0.14}, {0.65, 0.18}, {0.72, 0.3}, {0.68, 0.45},
               {0.28, 0.85}, {0.75, 0.85}}};
    out[3] = {{{0.28, 0.2}, {0.45, 0.14}, {0.65, 0.17}, {0.7, 0.3}, {0.6, 0.44}, {0.44, 0.48},
               {0.6, 0.52}, {0.72, 0.63}, {0.7, 0.78}, {0.55, 0.86}, {0.36, 0.85}, {0.27, 0.78}}};
    out[4] = {{{0.62, 0.85}, {0.62, 0.15}, {0.25, 0.62}, {0.76, 0.62}}};
    out[5] = {{{0.7, 0.15}, {0.33, 0.15}, {0.3, 0.45}, {0.45, 0.41}, {0.62, 0.44}, {0.72, 0.57},
               {0.7, 0.75}, {0.55, 0.86}, {0.38, 0.85}, {0.28, 0.78}}};
    out[6] = {{{0.66, 0.15}, {0.48, 0.2}, {0.35, 0.35}, {0.28, 0.55}, {0.3, 0.75}, {0.45, 0.86},
               {0.62, 0.82}, {0.7, 0.68}, {0.64, 0.54}, {0.48, 0.5}, {0.32, 0.58}}};
    out[7] = {{{0.27, 0.15}, {0.74, 0.15}, {0.42, 0.85}}};
    out[8] = {ellipse(0.5, 0.31, 0.17, 0.16), ellipse(0.5, 0.67, 0.21, 0.19)};
    out[9] = rotate180(out[6]);
    return out;
  }();
  return g;
}

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

DomainDataset generate_digits(const DigitsSpec& spec) {
  if (spec.count == 0) throw ArgumentError("digit count must be positive");
  if (spec.image_size < 8) throw ArgumentError("digit image size must be >= 8");
  if (spec.channels == 0) throw ArgumentError("digit channel count must be positive");

  const std::size_t S = spec.image_size, C = spec.channels;
  const ImageShape shape{S, S, C};
  std::vector<float> pixels(spec.count * shape.pixels());
  std::vector<int> labels(spec.count);
  const double pixel = 1.0 / static_cast<double>(S);

  for (std::size_t n = 0; n < spec.count; ++n) {
    Rng rng(derive_seed(spec.seed, n, 0xd161u));
    const int digit = static_cast<int>(n % 10);
    labels[n] = digit;

    // Random affine warp about the glyph centre plus per-vertex wobble.
    const double angle = uniform(rng, -12.0, 12.0) * std::numbers::pi / 180.0;
    const double scale = uniform(rng, 0.85, 1.08);
    const double aspect = uniform(rng, 0.88, 1.12);
    const double shear = uniform(rng, -0.18, 0.18);
    const double tx = uniform(rng, -0.06, 0.06), ty = uniform(rng, -0.06, 0.06);
    const double width = uniform(rng, 0.085, 0.13);
    const double intensity = uniform(rng, 0.75, 1.0);
    const double ca = std::cos(angle), sa = std::sin(angle);

    std::vector<Stroke> strokes;
    for (const Stroke& s : glyphs()[static_cast<std::size_t>(digit)]) {
      Stroke w;
      for (Point p : s) {
        double x = p.x - 0.5 + uniform(rng, -0.02, 0.02);
        double y = p.y - 0.5 + uniform(rng, -0.02, 0.02);
        x = (x + shear * y) * scale * aspect;
        y = y * scale;
        w.push_back({ca * x - sa * y + 0.5 + tx, sa * x + ca * y + 0.5 + ty});
      }
      strokes.push_back(std::move(w));
    }

    float* img = pixels.data() + n * shape.pixels();
    for (std::size_t py = 0; py < S; ++py)
      for (std::size_t px = 0; px < S; ++px) {
        const Point p{(static_cast<double>(px) + 0.5) * pixel, (static_cast<double>(py) + 0.5) * pixel};
        double d = 1e9;
        for (const Stroke& s : strokes)
          for (std::size_t i = 0; i + 1 < s.size(); ++i) d = std::min(d, segment_distance(p, s[i], s[i + 1]));
        // Anti-aliased coverage of a stroke of the given width.
        double v = std::clamp((0.5 * width - d) / pixel + 0.5, 0.0, 1.0) * intensity;
        v = std::clamp(v + 0.02 * normal(rng), 0.0, 1.0);
        for (std::size_t c = 0; c < C; ++c) img[(py * S + px) * C + c] = static_cast<float>(v);
      }
  }
  DomainDataset d(spec.domain_id, 10, shape, std::move(pixels), std::move(labels));
  d.set_provenance("{\"generator\":\"digits\",\"seed\":" + std::to_string(spec.seed) +
                   ",\"image_size\":" + std::to_string(S) + "}");
  return d;
}

}  // namespace mtda
