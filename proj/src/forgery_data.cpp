// Copyright 2026 The cmfd Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cmfd/forgery_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "cmfd/random.hpp"

namespace cmfd {

namespace {

constexpr double kPi = std::numbers::pi;

struct Point {
  double x;
  double y;
};

// Even-odd rule at pixel centre (x + 0.5, y + 0.5).
bool inside_polygon(const std::vector<Point>& poly, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > py) != (b.y > py)) {
      const double cross_x = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
      if (px < cross_x) inside = !inside;
    }
  }
  return inside;
}

void fill_polygon(LabelMap& mask, const std::vector<Point>& poly) {
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x)
      if (inside_polygon(poly, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5))
        mask.at(y, x) = 1;
}

void fill_ellipse(LabelMap& mask, Point centre, double ax, double ay, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t y = 0; y < mask.height; ++y) {
    for (std::size_t x = 0; x < mask.width; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - centre.x;
      const double dy = static_cast<double>(y) + 0.5 - centre.y;
      const double u = (dx * c + dy * s) / ax;
      const double v = (-dx * s + dy * c) / ay;
      if (u * u + v * v <= 1.0) mask.at(y, x) = 1;
    }
  }
}

// Keeps only the largest 8-connected component of a 0/1 mask.
LabelMap largest_component(const LabelMap& mask) {
  std::vector<int> component(mask.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;
  const auto h = static_cast<std::ptrdiff_t>(mask.height);
  const auto w = static_cast<std::ptrdiff_t>(mask.width);
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask.labels[start] || component[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    sizes.push_back(0);
    stack.push_back(start);
    component[start] = id;
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      ++sizes.back();
      const auto y = static_cast<std::ptrdiff_t>(idx) / w;
      const auto x = static_cast<std::ptrdiff_t>(idx) % w;
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const std::ptrdiff_t ny = y + dy;
          const std::ptrdiff_t nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          const auto n = static_cast<std::size_t>(ny * w + nx);
          if (mask.labels[n] && component[n] < 0) {
            component[n] = id;
            stack.push_back(n);
          }
        }
      }
    }
  }
  LabelMap out(mask.height, mask.width);
  if (sizes.empty()) return out;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < mask.size(); ++i) out.labels[i] = component[i] == best ? 1 : 0;
  return out;
}

LabelMap draw_region_candidate(Rng& rng, std::size_t height, std::size_t width) {
  LabelMap mask(height, width);
  const auto h = static_cast<double>(height);
  const auto w = static_cast<double>(width);
  const double target_fraction = rng.uniform(0.03, 0.12);
  const double radius = std::sqrt(target_fraction * h * w / kPi);
  const Point centre{rng.uniform(0.2, 0.8) * w, rng.uniform(0.2, 0.8) * h};
  if (rng.bernoulli(0.6)) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(5, 10));
    std::vector<Point> poly;
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < n; ++i) {
      const double jitter = rng.uniform(-0.35, 0.35);
      const double angle = phase + (static_cast<double>(i) + 0.5 + jitter) * 2.0 * kPi / static_cast<double>(n);
      const double r = radius * rng.uniform(0.65, 1.3);
      poly.push_back({centre.x + r * std::cos(angle), centre.y + r * std::sin(angle)});
    }
    fill_polygon(mask, poly);
  } else {
    const auto n = static_cast<int>(rng.uniform_int(2, 3));
    for (int i = 0; i < n; ++i) {
      const Point c{centre.x + rng.uniform(-0.5, 0.5) * radius, centre.y + rng.uniform(-0.5, 0.5) * radius};
      fill_ellipse(mask, c, radius * rng.uniform(0.5, 1.1), radius * rng.uniform(0.5, 1.1),
                   rng.uniform(0.0, kPi));
    }
  }
  return largest_component(mask);
}

struct Affine {
  double cos_t;
  double sin_t;
  double scale;
  bool flip;
};

// Exact trig for multiples of 90 degrees keeps axis-aligned rotations lossless.
std::pair<double, double> exact_cos_sin(double degrees) {
  const double reduced = std::fmod(degrees, 360.0);
  if (reduced == 0.0) return {1.0, 0.0};
  if (reduced == 90.0) return {0.0, 1.0};
  if (reduced == 180.0) return {-1.0, 0.0};
  if (reduced == 270.0) return {0.0, -1.0};
  const double rad = reduced * kPi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

// Forward map of an offset from the patch centre (y axis points down; a
// positive angle turns counter-clockwise on screen).
Point forward(const Affine& a, Point d) {
  const double fx = a.flip ? -d.x : d.x;
  return {a.scale * (fx * a.cos_t + d.y * a.sin_t), a.scale * (-fx * a.sin_t + d.y * a.cos_t)};
}

Point inverse(const Affine& a, Point d) {
  const double ux = d.x / a.scale;
  const double uy = d.y / a.scale;
  const double rx = ux * a.cos_t - uy * a.sin_t;
  const double ry = ux * a.sin_t + uy * a.cos_t;
  return {a.flip ? -rx : rx, ry};
}

}  // namespace

Image generate_base_image(std::uint64_t seed, std::size_t size) {
  Rng rng(mix_seed(seed, "base_image"));
  const auto n = static_cast<double>(size);
  std::vector<double> canvas(size * size * 3);
  auto px = [&](std::size_t y, std::size_t x, std::size_t c) -> double& {
    return canvas[(y * size + x) * 3 + c];
  };

  // Layered background: linear gradient, a low-frequency wave and a finer
  // texture band per channel.
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = rng.uniform(50.0, 200.0);
    const double gx = rng.uniform(-60.0, 60.0);
    const double gy = rng.uniform(-60.0, 60.0);
    const double low_amp = rng.uniform(5.0, 20.0);
    const double low_fx = rng.uniform(0.5, 3.0) * 2.0 * kPi / n;
    const double low_fy = rng.uniform(0.5, 3.0) * 2.0 * kPi / n;
    const double low_phase = rng.uniform(0.0, 2.0 * kPi);
    const double hi_amp = rng.uniform(4.0, 12.0);
    const double hi_angle = rng.uniform(0.0, kPi);
    const double hi_freq = rng.uniform(8.0, 24.0) * 2.0 * kPi / n;
    const double hi_phase = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const auto fx = static_cast<double>(x);
        const auto fy = static_cast<double>(y);
        const double along = fx * std::cos(hi_angle) + fy * std::sin(hi_angle);
        px(y, x, c) = base + gx * fx / n + gy * fy / n +
                      low_amp * std::sin(low_fx * fx + low_phase) * std::cos(low_fy * fy) +
                      hi_amp * std::sin(hi_freq * along + hi_phase);
      }
    }
  }

  const auto shapes = static_cast<int>(rng.uniform_int(3, 8));
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(rng.uniform_int(0, 2));
    std::array<double, 3> color{};
    for (auto& v : color) v = rng.uniform(0.0, 255.0);
    const double stripe_amp = rng.bernoulli(0.5) ? rng.uniform(10.0, 35.0) : 0.0;
    const double stripe_period = rng.uniform(4.0, 14.0);
    const double stripe_angle = rng.uniform(0.0, kPi);
    LabelMap footprint(size, size);
    const Point centre{rng.uniform(0.0, n), rng.uniform(0.0, n)};
    const double extent = rng.uniform(0.08, 0.3) * n;
    if (kind == 0) {
      fill_ellipse(footprint, centre, extent * rng.uniform(0.5, 1.0), extent * rng.uniform(0.5, 1.0),
                   rng.uniform(0.0, kPi));
    } else {
      const std::size_t corners = kind == 1 ? 4 : 3;
      std::vector<Point> poly;
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      for (std::size_t i = 0; i < corners; ++i) {
        const double angle = phase + static_cast<double>(i) * 2.0 * kPi / static_cast<double>(corners) +
                             rng.uniform(-0.3, 0.3);
        const double r = extent * rng.uniform(0.6, 1.0);
        poly.push_back({centre.x + r * std::cos(angle), centre.y + r * std::sin(angle)});
      }
      fill_polygon(footprint, poly);
    }
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        if (!footprint.at(y, x)) continue;
        const double along = static_cast<double>(x) * std::cos(stripe_angle) +
                             static_cast<double>(y) * std::sin(stripe_angle);
        const double stripe = stripe_amp * std::sin(2.0 * kPi * along / stripe_period);
        for (std::size_t c = 0; c < 3; ++c) px(y, x, c) = color[c] + stripe;
      }
    }
  }

  Image image(size, size);
  for (std::size_t i = 0; i < canvas.size(); ++i)
    image.pixels[i] = round_to_u8(canvas[i] + rng.normal(0.0, 2.0));
  return image;
}

LabelMap sample_source_region(std::uint64_t seed, std::size_t height, std::size_t width) {
  if (height < 64 || width < 64)
    throw GenerationError("source region needs at least 64x64 pixels (seed " + std::to_string(seed) + ")");
  Rng rng(mix_seed(seed, "source_region"));
  const auto total = static_cast<double>(height * width);
  for (int draw = 0; draw < kRegionDraws; ++draw) {
    LabelMap mask = draw_region_candidate(rng, height, width);
    const double fraction = static_cast<double>(mask.count(1)) / total;
    if (fraction >= kMinSourceArea && fraction <= kMaxSourceArea) return mask;
  }
  throw GenerationError("no source region within area bounds after " + std::to_string(kRegionDraws) +
                        " draws (seed " + std::to_string(seed) + ")");
}

Patch extract_patch(const Image& image, const LabelMap& region) {
  if (region.height != image.height || region.width != image.width)
    throw ShapeError("region mask and image sizes differ");
  std::size_t y0 = region.height, y1 = 0, x0 = region.width, x1 = 0;
  for (std::size_t y = 0; y < region.height; ++y)
    for (std::size_t x = 0; x < region.width; ++x)
      if (region.at(y, x)) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
      }
  if (y0 > y1) throw GenerationError("empty source region");
  Patch patch;
  patch.height = y1 - y0 + 1;
  patch.width = x1 - x0 + 1;
  patch.pixels.resize(patch.height * patch.width * 3);
  patch.mask = LabelMap(patch.height, patch.width);
  for (std::size_t y = 0; y < patch.height; ++y)
    for (std::size_t x = 0; x < patch.width; ++x) {
      patch.mask.at(y, x) = region.at(y0 + y, x0 + x) ? 1 : 0;
      for (std::size_t c = 0; c < 3; ++c) patch.at(y, x, c) = image.at(y0 + y, x0 + x, c);
    }
  return patch;
}

Patch apply_affine(const Patch& patch, double scale, double rotation_deg, bool flip) {
  if (!(scale >= 0.5 && scale <= 2.0)) throw ValidationError("scale must lie in [0.5, 2]");
  if (!(rotation_deg >= 0.0 && rotation_deg < 360.0))
    throw ValidationError("rotation must lie in [0, 360)");
  const auto [cos_t, sin_t] = exact_cos_sin(rotation_deg);
  const Affine a{cos_t, sin_t, scale, flip};
  const auto h = static_cast<double>(patch.height);
  const auto w = static_cast<double>(patch.width);
  const Point in_centre{w / 2.0, h / 2.0};

  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  const std::array<Point, 4> corners{{{-w / 2, -h / 2}, {w / 2, -h / 2}, {-w / 2, h / 2}, {w / 2, h / 2}}};
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const Point p = forward(a, corners[i]);
    min_x = i ? std::min(min_x, p.x) : p.x;
    max_x = i ? std::max(max_x, p.x) : p.x;
    min_y = i ? std::min(min_y, p.y) : p.y;
    max_y = i ? std::max(max_y, p.y) : p.y;
  }
  const auto out_w = static_cast<std::size_t>(std::ceil(max_x - min_x - 1e-9));
  const auto out_h = static_cast<std::size_t>(std::ceil(max_y - min_y - 1e-9));
  const Point out_centre{static_cast<double>(out_w) / 2.0, static_cast<double>(out_h) / 2.0};

  Patch full;
  full.height = out_h;
  full.width = out_w;
  full.pixels.assign(out_h * out_w * 3, 0.0);
  full.mask = LabelMap(out_h, out_w);
  std::size_t y0 = out_h, y1 = 0, x0 = out_w, x1 = 0;
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      const Point d{static_cast<double>(x) + 0.5 - out_centre.x, static_cast<double>(y) + 0.5 - out_centre.y};
      const Point s = inverse(a, d);
      const double sx = s.x + in_centre.x;
      const double sy = s.y + in_centre.y;
      const double ix = std::floor(sx);
      const double iy = std::floor(sy);
      if (ix < 0 || iy < 0 || ix >= w || iy >= h) continue;
      if (!patch.mask.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix))) continue;
      full.mask.at(y, x) = 1;
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      const double fx = std::clamp(sx - 0.5, 0.0, w - 1);
      const double fy = std::clamp(sy - 0.5, 0.0, h - 1);
      const auto px0 = static_cast<std::size_t>(fx);
      const auto py0 = static_cast<std::size_t>(fy);
      const std::size_t px1 = std::min(px0 + 1, patch.width - 1);
      const std::size_t py1 = std::min(py0 + 1, patch.height - 1);
      const double wx = fx - static_cast<double>(px0);
      const double wy = fy - static_cast<double>(py0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1 - wx) * patch.at(py0, px0, c) + wx * patch.at(py0, px1, c);
        const double bottom = (1 - wx) * patch.at(py1, px0, c) + wx * patch.at(py1, px1, c);
        full.at(y, x, c) = (1 - wy) * top + wy * bottom;
      }
    }
  }
  if (y0 > y1) throw GenerationError("affine transform produced an empty patch");

  Patch out;
  out.height = y1 - y0 + 1;
  out.width = x1 - x0 + 1;
  out.pixels.resize(out.height * out.width * 3);
  out.mask = LabelMap(out.height, out.width);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x) {
      out.mask.at(y, x) = full.mask.at(y0 + y, x0 + x);
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = full.at(y0 + y, x0 + x, c);
    }
  return out;
}

ForgerySample compose_forgery(const Image& base, const LabelMap& src_mask, double scale,
                              double rotation_deg, bool flip, std::uint64_t seed) {
  const Patch moved = apply_affine(extract_patch(base, src_mask), scale, rotation_deg, flip);
  const std::string tag = " (seed " + std::to_string(seed) + ")";
  if (moved.height > base.height || moved.width > base.width)
    throw PlacementError("transformed region larger than the image" + tag);

  Rng rng(mix_seed(seed, "paste_offset"));
  for (int draw = 0; draw < kPlacementDraws; ++draw) {
    const auto oy = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(base.height - moved.height)));
    const auto ox = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(base.width - moved.width)));
    bool overlaps = false;
    for (std::size_t y = 0; y < moved.height && !overlaps; ++y)
      for (std::size_t x = 0; x < moved.width; ++x)
        if (moved.mask.at(y, x) && src_mask.at(oy + y, ox + x)) {
          overlaps = true;
          break;
        }
    if (overlaps) continue;

    ForgerySample sample;
    sample.image = base;
    sample.tri_mask = LabelMap(base.height, base.width);
    for (std::size_t i = 0; i < src_mask.size(); ++i)
      if (src_mask.labels[i]) sample.tri_mask.labels[i] = kSource;
    for (std::size_t y = 0; y < moved.height; ++y)
      for (std::size_t x = 0; x < moved.width; ++x) {
        if (!moved.mask.at(y, x)) continue;
        sample.tri_mask.at(oy + y, ox + x) = kTarget;
        for (std::size_t c = 0; c < 3; ++c) sample.image.at(oy + y, ox + x, c) = round_to_u8(moved.at(y, x, c));
      }
    sample.meta = {seed, seed, scale, rotation_deg, flip, oy, ox};
    return sample;
  }
  throw PlacementError("no valid paste offset in " + std::to_string(kPlacementDraws) + " draws" + tag);
}

ForgerySample generate_sample(std::uint64_t seed, std::size_t size) {
  for (int attempt = 0; attempt <= kRegenerations; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt) * kRegenerationStride;
    const Image base = generate_base_image(s, size);
    const LabelMap region = sample_source_region(s, size, size);
    Rng rng(mix_seed(s, "transform"));
    const double scale = rng.uniform(0.75, 1.33);
    const double rotation = rng.uniform(0.0, 360.0);
    const bool flip = rng.bernoulli(0.5);
    try {
      ForgerySample sample = compose_forgery(base, region, scale, rotation, flip, s);
      sample.meta.seed = seed;
      return sample;
    } catch (const PlacementError&) {
      continue;
    }
  }
  throw GenerationError("sample generation failed after " + std::to_string(kRegenerations) +
                        " regenerations (seed " + std::to_string(seed) + ")");
}

void validate_tri_mask(const LabelMap& tri_mask) {
  for (const std::uint8_t v : tri_mask.labels)
    if (v > kTarget) throw ValidationError("tri-class mask label " + std::to_string(v) + " outside {0,1,2}");
}

LabelMap binary_mask(const LabelMap& tri_mask) {
  validate_tri_mask(tri_mask);
  LabelMap out(tri_mask.height, tri_mask.width);
  for (std::size_t i = 0; i < tri_mask.size(); ++i) out.labels[i] = tri_mask.labels[i] != kPristine ? 1 : 0;
  return out;
}

}  // namespace cmfd
