#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mtda/data.hpp"
#include "mtda/errors.hpp"
#include "mtda/rng.hpp"

namespace mtda {

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::invert: return "invert";
    case ShiftKind::noise_background: return "noise_background";
    case ShiftKind::blur: return "blur";
    case ShiftKind::affine_jitter: return "affine_jitter";
    case ShiftKind::color_remap: return "color_remap";
  }
  return "unknown";
}

ShiftKind parse_shift_kind(const std::string& name) {
  for (ShiftKind k : {ShiftKind::invert, ShiftKind::noise_background, ShiftKind::blur,
                      ShiftKind::affine_jitter, ShiftKind::color_remap})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown transform_kind '" + name + "'");
}

std::string shifted_domain_id(const std::string& base_id, const DomainShiftSpec& spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", spec.strength);
  return base_id + "-" + to_string(spec.kind) + "-s" + buf + "-seed" + std::to_string(spec.seed);
}

namespace {

using Image = std::vector<float>;

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

// Bilinear read with zero outside the image.
double sample_bilinear(std::span<const float> img, const ImageShape& s, double y, double x,
                       std::size_t c) {
  const double fy = std::floor(y), fx = std::floor(x);
  const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
  const double wy = y - fy, wx = x - fx;
  auto at = [&](long yy, long xx) -> double {
    if (yy < 0 || xx < 0 || yy >= static_cast<long>(s.height) || xx >= static_cast<long>(s.width))
      return 0.0;
    return img[(static_cast<std::size_t>(yy) * s.width + static_cast<std::size_t>(xx)) * s.channels + c];
  };
  return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
         wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
}

void invert(std::span<const float> in, Image& out, double s) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = clamp01(std::abs(s - static_cast<double>(in[i])));
}

void blur(std::span<const float> in, Image& out, const ImageShape& shape, double s) {
  const double sigma = 1.5 * s;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i)
    norm += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= norm;

  const long H = static_cast<long>(shape.height), W = static_cast<long>(shape.width);
  const std::size_t C = shape.channels;
  std::vector<double> tmp(in.size());
  auto idx = [&](long y, long x, std::size_t c) {
    return (static_cast<std::size_t>(y) * shape.width + static_cast<std::size_t>(x)) * C + c;
  };
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * in[idx(y, std::clamp(x + k, 0L, W - 1), c)];
        tmp[idx(y, x, c)] = acc;
      }
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp[idx(std::clamp(y + k, 0L, H - 1), x, c)];
        out[idx(y, x, c)] = clamp01(acc);
      }
}

void affine_jitter(std::span<const float> in, Image& out, const ImageShape& shape, double s, Rng& rng) {
  const double angle = s * uniform(rng, -30.0, 30.0) * std::numbers::pi / 180.0;
  const double scale = 1.0 + s * uniform(rng, -0.25, 0.25);
  const double shear = s * uniform(rng, -0.3, 0.3);
  const double ty = s * uniform(rng, -0.15, 0.15) * static_cast<double>(shape.height);
  const double tx = s * uniform(rng, -0.15, 0.15) * static_cast<double>(shape.width);
  const double cy = 0.5 * (static_cast<double>(shape.height) - 1.0);
  const double cx = 0.5 * (static_cast<double>(shape.width) - 1.0);
  // Forward map A = R * Shear * scale; sample the source at A^-1 (p - c - t) + c.
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double a00 = scale * ca, a01 = scale * (ca * shear - sa);
  const double a10 = scale * sa, a11 = scale * (sa * shear + ca);
  const double det = a00 * a11 - a01 * a10;
  const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;
  for (std::size_t y = 0; y < shape.height; ++y)
    for (std::size_t x = 0; x < shape.width; ++x) {
      const double dx = static_cast<double>(x) - cx - tx, dy = static_cast<double>(y) - cy - ty;
      const double sx = i00 * dx + i01 * dy + cx, sy = i10 * dx + i11 * dy + cy;
      for (std::size_t c = 0; c < shape.channels; ++c)
        out[(y * shape.width + x) * shape.channels + c] = clamp01(sample_bilinear(in, shape, sy, sx, c));
    }
}

// MNIST-M style: blend |texture - x| where the texture is a smooth random
// colour field plus fine noise.
void noise_background(std::span<const float> in, Image& out, const ImageShape& shape, double s, Rng& rng) {
  constexpr std::size_t grid = 4;
  const std::size_t C = shape.channels;
  std::vector<double> coarse(grid * grid * C);
  for (auto& v : coarse) v = uniform01(rng);
  for (std::size_t y = 0; y < shape.height; ++y)
    for (std::size_t x = 0; x < shape.width; ++x) {
      const double gy = static_cast<double>(y) * (grid - 1) / std::max<double>(1.0, shape.height - 1.0);
      const double gx = static_cast<double>(x) * (grid - 1) / std::max<double>(1.0, shape.width - 1.0);
      const std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), grid - 2);
      const std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), grid - 2);
      const double wy = gy - static_cast<double>(y0), wx = gx - static_cast<double>(x0);
      for (std::size_t c = 0; c < C; ++c) {
        auto g = [&](std::size_t yy, std::size_t xx) { return coarse[(yy * grid + xx) * C + c]; };
        double tex = (1 - wy) * ((1 - wx) * g(y0, x0) + wx * g(y0, x0 + 1)) +
                     wy * ((1 - wx) * g(y0 + 1, x0) + wx * g(y0 + 1, x0 + 1));
        tex = std::clamp(tex + 0.15 * normal(rng), 0.0, 1.0);
        const std::size_t i = (y * shape.width + x) * C + c;
        out[i] = clamp01((1.0 - s) * in[i] + s * std::abs(tex - in[i]));
      }
    }
}

void color_remap(std::span<const float> in, Image& out, const ImageShape& shape, double s, Rng& rng) {
  const std::size_t C = shape.channels;
  std::vector<double> bg(C), fg(C);
  double contrast = 0.0;
  do {
    contrast = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      bg[c] = uniform01(rng);
      fg[c] = uniform01(rng);
      contrast += std::abs(fg[c] - bg[c]);
    }
    contrast /= static_cast<double>(C);
  } while (contrast < 0.35);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t c = i % C;
    out[i] = clamp01((1.0 - s) * in[i] + s * (bg[c] + in[i] * (fg[c] - bg[c])));
  }
}

}  // namespace

DomainDataset generate_shifted_domain(const DomainDataset& base, const DomainShiftSpec& spec) {
  if (base.empty()) throw ArgumentError("cannot shift an empty dataset");
  if (!(spec.strength >= 0.0 && spec.strength <= 1.0))
    throw ConfigError("shift strength " + std::to_string(spec.strength) + " outside [0,1]");

  const ImageShape& shape = base.shape();
  const std::size_t n = shape.pixels();
  std::vector<float> pixels(base.pixels().begin(), base.pixels().end());
  if (spec.strength > 0.0) {
    Image out(n);
    for (std::size_t i = 0; i < base.size(); ++i) {
      Rng rng(derive_seed(spec.seed, i, static_cast<std::uint64_t>(spec.kind) + 1));
      const auto img = base.image(i);
      switch (spec.kind) {
        case ShiftKind::invert: invert(img, out, spec.strength); break;
        case ShiftKind::blur: blur(img, out, shape, spec.strength); break;
        case ShiftKind::affine_jitter: affine_jitter(img, out, shape, spec.strength, rng); break;
        case ShiftKind::noise_background: noise_background(img, out, shape, spec.strength, rng); break;
        case ShiftKind::color_remap: color_remap(img, out, shape, spec.strength, rng); break;
      }
      std::copy(out.begin(), out.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
  }
  std::optional<std::vector<int>> labels;
  if (base.has_labels()) labels = base.labels();
  DomainDataset shifted(shifted_domain_id(base.domain_id(), spec), base.num_classes(), shape,
                        std::move(pixels), std::move(labels));
  char buf[160];
  std::snprintf(buf, sizeof buf, "{\"transform_kind\":\"%s\",\"strength\":%.17g,\"seed\":%llu}",
                to_string(spec.kind).c_str(), spec.strength, static_cast<unsigned long long>(spec.seed));
  shifted.set_provenance(buf);
  return shifted;
}

}  // namespace mtda
