#include <algorithm>
#include <cmath>

#include "ducd/data.hpp"
#include "ducd/rng.hpp"

namespace ducd {
namespace {

// Background stays in the mid range and object channels in the extremes,
// so a clean render always differs from the background it covers.
constexpr double kBgLo = 0.30;
constexpr double kBgHi = 0.50;
constexpr double kBgGradient = 0.06;
constexpr double kBgSpeckle = 0.04;

struct Obj {
  bool disc;
  std::int64_t cx, cy, half;
  double color[3];
  // 0 = unchanged, 1 = appears (only in t2), 2 = disappears (only in t1),
  // 3 = moves
  int change;
  std::int64_t cx2, cy2;
};

void draw(Tensor& img, const Obj& o, std::int64_t cx, std::int64_t cy) {
  const auto h = img.dim(1), w = img.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h * w);
  double* d = img.data();
  const std::int64_t r = o.half;
  for (std::int64_t y = std::max<std::int64_t>(0, cy - r);
       y <= std::min(h - 1, cy + r); ++y) {
    for (std::int64_t x = std::max<std::int64_t>(0, cx - r);
         x <= std::min(w - 1, cx + r); ++x) {
      if (o.disc) {
        const auto dx = x - cx, dy = y - cy;
        if (dx * dx + dy * dy > r * r) continue;
      }
      for (int c = 0; c < 3; ++c)
        d[static_cast<std::size_t>(c) * plane +
          static_cast<std::size_t>(y * w + x)] = o.color[c];
    }
  }
}

Tensor render_background(std::int64_t size, Rng& rng) {
  Tensor img = Tensor::zeros({3, size, size});
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(kBgLo, kBgHi);
    gx[c] = rng.uniform(-kBgGradient, kBgGradient);
    gy[c] = rng.uniform(-kBgGradient, kBgGradient);
  }
  double* d = img.data();
  const std::size_t plane = static_cast<std::size_t>(size * size);
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(size);
      const double fy = static_cast<double>(y) / static_cast<double>(size);
      const double speckle = rng.uniform(-kBgSpeckle, kBgSpeckle);
      for (int c = 0; c < 3; ++c)
        d[static_cast<std::size_t>(c) * plane +
          static_cast<std::size_t>(y * size + x)] =
            base[c] + gx[c] * fx + gy[c] * fy + speckle;
    }
  }
  return img;
}

double object_channel(Rng& rng) {
  // Extremes only; at least 0.08 away from any background value.
  return rng.below(2) == 0 ? rng.uniform(0.00, 0.10)
                           : rng.uniform(0.72, 0.95);
}

Tensor add_noise_clamped(const Tensor& clean, double shift, double sigma,
                         Rng& rng) {
  Tensor out = Tensor::zeros(clean.shape());
  const double* s = clean.data();
  double* d = out.data();
  const auto n = static_cast<std::size_t>(clean.numel());
  for (std::size_t i = 0; i < n; ++i) {
    const double v = s[i] + shift + sigma * rng.gaussian();
    d[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

}  // namespace

Sample generate_pair(std::uint64_t seed, std::int64_t size, int n_objects,
                     double p_change, double noise_sigma,
                     double illum_shift) {
  if (size < 8) throw ValueError(cat("generate_pair: size ", size, " < 8"));
  if (p_change < 0.0 || p_change > 1.0)
    throw ValueError("generate_pair: p_change must lie in [0,1]");
  Rng rng(seed);

  Tensor bg = render_background(size, rng);
  Tensor clean1 = Tensor::from_data(bg.shape(), bg.values());
  Tensor clean2 = Tensor::from_data(bg.shape(), bg.values());

  const std::int64_t min_half = std::max<std::int64_t>(2, size / 16);
  const std::int64_t max_half = std::max(min_half + 1, size / 6);
  for (int i = 0; i < n_objects; ++i) {
    Obj o;
    o.disc = rng.below(2) == 0;
    o.half = min_half +
             static_cast<std::int64_t>(rng.below(
                 static_cast<std::uint64_t>(max_half - min_half + 1)));
    const auto span = static_cast<std::uint64_t>(size - 2 * o.half);
    o.cx = o.half + static_cast<std::int64_t>(rng.below(span));
    o.cy = o.half + static_cast<std::int64_t>(rng.below(span));
    for (int c = 0; c < 3; ++c) o.color[c] = object_channel(rng);
    o.change = rng.uniform01() < p_change
                   ? 1 + static_cast<int>(rng.below(3))
                   : 0;
    o.cx2 = o.cx;
    o.cy2 = o.cy;
    if (o.change == 3) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        o.cx2 = o.half + static_cast<std::int64_t>(rng.below(span));
        o.cy2 = o.half + static_cast<std::int64_t>(rng.below(span));
        if (o.cx2 != o.cx || o.cy2 != o.cy) break;
      }
      if (o.cx2 == o.cx && o.cy2 == o.cy)
        o.cx2 = o.cx > size / 2 ? o.cx - 1 : o.cx + 1;
    }

    if (o.change != 1) draw(clean1, o, o.cx, o.cy);   // present at t1
    if (o.change != 2) draw(clean2, o, o.cx2, o.cy2);  // present at t2
  }

  // The label is the clean-render difference, so it marks exactly the
  // semantic changes and never the illumination or noise.
  Tensor label = Tensor::zeros({size, size});
  {
    const std::size_t plane = static_cast<std::size_t>(size * size);
    const double* a = clean1.data();
    const double* b = clean2.data();
    double* l = label.data();
    for (std::size_t i = 0; i < plane; ++i) {
      const bool diff = a[i] != b[i] || a[plane + i] != b[plane + i] ||
                        a[2 * plane + i] != b[2 * plane + i];
      l[i] = diff ? 1.0 : 0.0;
    }
  }

  const double shift = (rng.below(2) == 0 ? 1.0 : -1.0) * illum_shift;
  Sample sample;
  sample.x1 = add_noise_clamped(clean1, 0.0, noise_sigma, rng);
  sample.x2 = add_noise_clamped(clean2, shift, noise_sigma, rng);
  sample.label = std::move(label);
  sample.id = cat("s", seed);
  return sample;
}

Dataset generate_dataset(const std::string& split, std::size_t count,
                         std::uint64_t base_seed, std::uint64_t start_index,
                         const GenConfig& gen) {
  Dataset ds;
  ds.split = split;
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t idx = start_index + i;
    Sample s = generate_pair(base_seed + idx, gen.size, gen.n_objects,
                             gen.p_change, gen.noise_sigma, gen.illum_shift);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06llu",
                  static_cast<unsigned long long>(idx));
    s.id = buf;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace ducd
