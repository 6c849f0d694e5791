#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ducd/tensor.hpp"

namespace ducd {

// --- netpbm I/O -----------------------------------------------------------
// Binary PPM (P6) for RGB in [0,1], binary PGM (P5) for single-channel maps.
// Write quantizes with round-half-up to 8 bits; read(write(x)) reproduces x
// within 1/510 per channel. Parse failures throw IoError naming the byte
// offset.

void write_ppm(const std::string& path, const Tensor& image);  // [3,H,W]
Tensor read_ppm(const std::string& path);
void write_pgm(const std::string& path, const Tensor& image);  // [H,W]
Tensor read_pgm(const std::string& path);

// --- synthetic bitemporal pairs -------------------------------------------

struct Sample {
  Tensor x1;     // [3,H,W], values in [0,1]
  Tensor x2;     // [3,H,W]
  Tensor label;  // [H,W], binary
  std::string id;
};

// One synthetic pair: shared textured background, n_objects colored
// rectangles/discs of which each independently appears, disappears or moves
// with probability p_change. The label marks exactly the pixels where the
// two clean renders differ; the brightness shift on x2 and the per-image
// Gaussian noise are non-semantic and never labeled.
Sample generate_pair(std::uint64_t seed, std::int64_t size, int n_objects,
                     double p_change, double noise_sigma, double illum_shift);

struct Dataset {
  std::vector<Sample> samples;
  std::string split;
};

struct GenConfig {
  std::int64_t size = 64;
  int n_objects = 6;
  double p_change = 0.5;
  double noise_sigma = 0.03;
  double illum_shift = 0.08;
};

// Per-sample seeds are base_seed + global index, so splits generated in
// sequence (train, val, test) never share a sample.
Dataset generate_dataset(const std::string& split, std::size_t count,
                         std::uint64_t base_seed, std::uint64_t start_index,
                         const GenConfig& gen);

// Directory layout: <root>/<split>/<id>_a.ppm, <id>_b.ppm, <id>_label.pgm
// plus a manifest.txt with one id per line.
void save_dataset(const Dataset& ds, const std::string& root);
Dataset load_dataset(const std::string& root, const std::string& split);

// --- batching ---------------------------------------------------------------

struct Batch {
  Tensor x1;      // [B,3,H,W]
  Tensor x2;      // [B,3,H,W]
  Tensor labels;  // [B,H,W]
};

// Deterministic batch order: identity order without a seed, Fisher-Yates
// shuffle with one otherwise. The final partial batch is emitted.
std::vector<std::vector<std::size_t>> batch_indices(
    std::size_t count, std::size_t batch_size,
    std::optional<std::uint64_t> shuffle_seed);

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& idx);

// --- classical baseline -----------------------------------------------------

// Channel-mean absolute difference thresholded at theta_c.
Tensor classical_diff_baseline(const Tensor& x1, const Tensor& x2,
                               double theta_c);

}  // namespace ducd
