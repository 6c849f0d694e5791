#include <filesystem>
#include <fstream>

#include "ducd/data.hpp"
#include "ducd/rng.hpp"

namespace fs = std::filesystem;

namespace ducd {

void save_dataset(const Dataset& ds, const std::string& root) {
  const fs::path dir = fs::path(root) / ds.split;
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest)
    throw IoError(cat((dir / "manifest.txt").string(), ": cannot write"));
  for (const auto& s : ds.samples) {
    write_ppm((dir / (s.id + "_a.ppm")).string(), s.x1);
    write_ppm((dir / (s.id + "_b.ppm")).string(), s.x2);
    write_pgm((dir / (s.id + "_label.pgm")).string(), s.label);
    manifest << s.id << "\n";
  }
}

Dataset load_dataset(const std::string& root, const std::string& split) {
  const fs::path dir = fs::path(root) / split;
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest)
    throw IoError(cat("missing manifest: ", (dir / "manifest.txt").string()));
  Dataset ds;
  ds.split = split;
  std::string id;
  while (std::getline(manifest, id)) {
    if (id.empty()) continue;
    Sample s;
    s.id = id;
    s.x1 = read_ppm((dir / (id + "_a.ppm")).string());
    s.x2 = read_ppm((dir / (id + "_b.ppm")).string());
    Tensor label = read_pgm((dir / (id + "_label.pgm")).string());
    // Quantized labels come back as {0, 1} after the 0/255 roundtrip.
    double* l = label.data();
    for (std::int64_t i = 0; i < label.numel(); ++i)
      l[i] = l[i] > 0.5 ? 1.0 : 0.0;
    s.label = std::move(label);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty())
    throw IoError(cat("dataset split '", split, "' at ", root, " is empty"));
  return ds;
}

std::vector<std::vector<std::size_t>> batch_indices(
    std::size_t count, std::size_t batch_size,
    std::optional<std::uint64_t> shuffle_seed) {
  if (count == 0) throw ValueError("batch_indices: empty dataset");
  if (batch_size == 0) throw ValueError("batch_indices: batch_size must be >= 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  if (shuffle_seed.has_value()) {
    Rng rng(*shuffle_seed);
    for (std::size_t i = count - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i + 1));
      std::swap(order[i], order[j]);
    }
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ValueError("make_batch: empty index list");
  const auto& first = ds.samples.at(idx[0]);
  const auto h = first.x1.dim(1), w = first.x1.dim(2);
  const auto b = static_cast<std::int64_t>(idx.size());
  Batch batch;
  batch.x1 = Tensor::zeros({b, 3, h, w});
  batch.x2 = Tensor::zeros({b, 3, h, w});
  batch.labels = Tensor::zeros({b, h, w});
  const std::size_t img = static_cast<std::size_t>(3 * h * w);
  const std::size_t lbl = static_cast<std::size_t>(h * w);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& s = ds.samples.at(idx[i]);
    if (s.x1.dim(1) != h || s.x1.dim(2) != w)
      throw ShapeError("make_batch: mixed image sizes in one batch");
    std::copy_n(s.x1.data(), img, batch.x1.data() + i * img);
    std::copy_n(s.x2.data(), img, batch.x2.data() + i * img);
    std::copy_n(s.label.data(), lbl, batch.labels.data() + i * lbl);
  }
  return batch;
}

Tensor classical_diff_baseline(const Tensor& x1, const Tensor& x2,
                               double theta_c) {
  if (x1.shape() != x2.shape())
    throw ShapeError("classical_diff_baseline: shape mismatch");
  if (x1.rank() != 3)
    throw ShapeError("classical_diff_baseline: expected [C,H,W] images");
  const auto c = x1.dim(0), h = x1.dim(1), w = x1.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h * w);
  Tensor out = Tensor::zeros({h, w});
  const double* a = x1.data();
  const double* b = x2.data();
  double* o = out.data();
  for (std::size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (std::int64_t ch = 0; ch < c; ++ch)
      acc += std::fabs(a[static_cast<std::size_t>(ch) * plane + i] -
                       b[static_cast<std::size_t>(ch) * plane + i]);
    o[i] = acc / static_cast<double>(c) > theta_c ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace ducd
