#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "ducd/data.hpp"

namespace ducd {
namespace {

std::uint8_t quantize(double v) {
  double b = std::floor(v * 255.0 + 0.5);  // round half up
  if (b < 0.0) b = 0.0;
  if (b > 255.0) b = 255.0;
  return static_cast<std::uint8_t>(b);
}

struct Parser {
  std::vector<char> bytes;
  std::size_t pos = 0;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(cat(path, ": ", what, " at byte offset ", pos));
  }

  int peek() const {
    return pos < bytes.size() ? static_cast<unsigned char>(bytes[pos]) : -1;
  }
  int get() {
    if (pos >= bytes.size()) fail("unexpected end of file");
    return static_cast<unsigned char>(bytes[pos++]);
  }

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      const int c = peek();
      if (c == '#') {
        while (pos < bytes.size() && get() != '\n') {
        }
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::int64_t read_int() {
    skip_space_and_comments();
    if (pos >= bytes.size() || peek() < '0' || peek() > '9')
      fail("expected integer");
    std::int64_t v = 0;
    while (pos < bytes.size() && peek() >= '0' && peek() <= '9') {
      v = v * 10 + (get() - '0');
      if (v > 1'000'000'000) fail("integer out of range");
    }
    return v;
  }
};

Parser open_parser(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(cat(path, ": cannot open for reading"));
  Parser p;
  p.path = path;
  p.bytes.assign(std::istreambuf_iterator<char>(f),
                 std::istreambuf_iterator<char>());
  return p;
}

Tensor read_netpbm(const std::string& path, char expected_kind) {
  Parser p = open_parser(path);
  if (p.get() != 'P' || p.get() != expected_kind)
    throw IoError(cat(path, ": bad magic, expected P", expected_kind,
                      " at byte offset 0"));
  const std::int64_t w = p.read_int();
  const std::int64_t h = p.read_int();
  const std::int64_t maxval = p.read_int();
  if (w < 1 || h < 1) p.fail("non-positive dimensions");
  if (maxval != 255) p.fail("unsupported maxval (only 255)");
  // Exactly one whitespace byte separates the header from the payload.
  const int sep = p.get();
  if (sep != '\n' && sep != ' ' && sep != '\t' && sep != '\r')
    p.fail("expected whitespace before payload");

  const std::int64_t channels = expected_kind == '6' ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(w * h * channels);
  if (p.bytes.size() - p.pos < need)
    throw IoError(cat(path, ": truncated payload, need ", need,
                      " bytes but only ", p.bytes.size() - p.pos,
                      " remain at byte offset ", p.pos));

  const auto* payload =
      reinterpret_cast<const unsigned char*>(p.bytes.data() + p.pos);
  if (channels == 3) {
    // Interleaved RGB on disk -> planar [3,H,W].
    Tensor t = Tensor::zeros({3, h, w});
    double* d = t.data();
    const std::size_t plane = static_cast<std::size_t>(h * w);
    for (std::size_t i = 0; i < plane; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        d[c * plane + i] = static_cast<double>(payload[i * 3 + c]) / 255.0;
    return t;
  }
  Tensor t = Tensor::zeros({h, w});
  double* d = t.data();
  for (std::size_t i = 0; i < need; ++i)
    d[i] = static_cast<double>(payload[i]) / 255.0;
  return t;
}

void write_bytes(const std::string& path, const std::string& header,
                 const std::vector<std::uint8_t>& payload) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(cat(path, ": cannot open for writing"));
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  f.write(reinterpret_cast<const char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (!f) throw IoError(cat(path, ": write failed"));
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw ShapeError("write_ppm: expected [3,H,W] image");
  const auto h = image.dim(1), w = image.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h * w);
  std::vector<std::uint8_t> payload(plane * 3);
  const double* d = image.data();
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      payload[i * 3 + c] = quantize(d[c * plane + i]);
  write_bytes(path, cat("P6\n", w, " ", h, "\n255\n"), payload);
}

Tensor read_ppm(const std::string& path) { return read_netpbm(path, '6'); }

void write_pgm(const std::string& path, const Tensor& image) {
  if (image.rank() != 2) throw ShapeError("write_pgm: expected [H,W] image");
  const auto h = image.dim(0), w = image.dim(1);
  const std::size_t n = static_cast<std::size_t>(h * w);
  std::vector<std::uint8_t> payload(n);
  const double* d = image.data();
  for (std::size_t i = 0; i < n; ++i) payload[i] = quantize(d[i]);
  write_bytes(path, cat("P5\n", w, " ", h, "\n255\n"), payload);
}

Tensor read_pgm(const std::string& path) { return read_netpbm(path, '5'); }

}  // namespace ducd
