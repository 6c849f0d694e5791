#include <cstring>
#include <fstream>

#include "ducd/train.hpp"

namespace ducd {
namespace {

constexpr char kMagic[4] = {'D', 'U', 'C', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

struct Reader {
  std::string bytes;
  std::size_t pos = 0;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(cat(path, ": ", what, " at byte offset ", pos));
  }
  void need(std::size_t n) const {
    if (bytes.size() - pos < n) fail("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(bytes[pos + i]))
              << (8 * i);
    pos += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const TrainConfig& cfg,
                     const ParamStore& params) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  const std::string cfg_text = serialize_train_config(cfg);
  put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
  out += cfg_text;
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(cat(path, ": cannot open for writing"));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(cat(path, ": write failed"));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(cat(path, ": cannot open checkpoint"));
  Reader r;
  r.path = path;
  r.bytes.assign(std::istreambuf_iterator<char>(f),
                 std::istreambuf_iterator<char>());
  r.need(4);
  if (std::memcmp(r.bytes.data(), kMagic, 4) != 0)
    throw IoError(cat(path, ": bad magic, not a DUCD checkpoint"));
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError(cat(path, ": unsupported checkpoint version ", version));

  LoadedCheckpoint ckpt;
  const std::uint32_t cfg_len = r.u32();
  ckpt.cfg = parse_train_config_text(r.str(cfg_len));

  const std::uint32_t count = r.u32();
  ckpt.params.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) r.fail(cat("bad rank ", rank));
    std::vector<std::int64_t> shape(rank);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d < 1) r.fail("bad dimension");
      numel *= d;
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (auto& v : data) v = r.f64();
    ckpt.params.emplace_back(std::move(name),
                             Tensor::from_data(std::move(shape),
                                               std::move(data)));
  }
  return ckpt;
}

void apply_checkpoint(const LoadedCheckpoint& ckpt, DualUNet& model) {
  if (ckpt.params.size() != model.params().size())
    throw TrainError(cat("checkpoint holds ", ckpt.params.size(),
                         " parameters but the model expects ",
                         model.params().size()));
  for (const auto& [name, t] : ckpt.params) {
    Tensor& dst = model.params().get(name);  // unknown name -> error
    if (dst.shape() != t.shape())
      throw TrainError(cat("checkpoint parameter '", name,
                           "' has mismatched shape"));
    std::copy_n(t.data(), static_cast<std::size_t>(t.numel()), dst.data());
  }
}

}  // namespace ducd
