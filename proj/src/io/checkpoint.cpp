#include "nsub/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "nsub/errors.hpp"
#include "nsub/io/run_spec.hpp"

namespace nsub {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }

  std::vector<unsigned char> out;

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t k) const {
    if (k > size_ - pos_) throw FormatError("checkpoint: truncated file");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'N', 'S', 'U', 'B'};
constexpr std::uint32_t kMaxWidth = 1u << 24;

std::string_view as_view(const std::vector<unsigned char>& v, std::size_t n) {
  return {reinterpret_cast<const char*>(v.data()), n};
}

}  // namespace

std::vector<unsigned char> encode_model(const SubspaceModel& model) {
  model.validate();
  Writer w;
  w.out.insert(w.out.end(), kMagic, kMagic + 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.config_dim()));
  w.u32(static_cast<std::uint32_t>(model.d));
  w.u32(static_cast<std::uint32_t>(model.m));
  w.f64(model.sigma);
  const std::vector<int> sizes = model.mlp.layer_sizes();
  w.u32(static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) w.u32(static_cast<std::uint32_t>(s));
  for (int l = 0; l < model.mlp.num_layers(); ++l) {
    const Mat& W = model.mlp.weights[l];
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) w.f64(W(r, c));
    }
    for (Eigen::Index i = 0; i < model.mlp.biases[l].size(); ++i) w.f64(model.mlp.biases[l][i]);
  }
  w.bytes(model.fingerprint.system_name);
  w.u64(model.fingerprint.config_hash);
  const TrainSummary& s = model.summary;
  w.i64(s.steps);
  w.f64(s.final_loss);
  w.f64(s.final_potential);
  w.f64(s.final_penalty);
  w.f64(s.final_log_ratio);
  w.i64(s.energy_clamps);
  w.u64(fnv1a(as_view(w.out, w.out.size())));
  return std::move(w.out);
}

SubspaceModel decode_model(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: not an NSUB file");
  }
  if (bytes.size() < 16) throw FormatError("checkpoint: truncated file");
  Reader r(bytes.data() + 4, bytes.size() - 4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  {
    Reader tail(bytes.data() + bytes.size() - 8, 8);
    if (tail.u64() != fnv1a(as_view(bytes, bytes.size() - 8))) {
      throw FormatError("checkpoint: checksum mismatch (truncated or corrupt file)");
    }
  }

  SubspaceModel model;
  const std::uint32_t n = r.u32();
  model.d = static_cast<int>(r.u32());
  model.m = static_cast<int>(r.u32());
  model.sigma = r.f64();
  const std::uint32_t count = r.u32();
  if (count < 2 || count > 64) throw FormatError("checkpoint: implausible layer count");
  std::vector<int> sizes(count);
  for (auto& s : sizes) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > kMaxWidth) throw FormatError("checkpoint: implausible layer width");
    s = static_cast<int>(v);
  }
  if (static_cast<std::uint32_t>(sizes.back()) != n) throw FormatError("checkpoint: output width differs from n");
  if (sizes.front() != model.d + model.m) throw FormatError("checkpoint: input width differs from d + m");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t values = static_cast<std::size_t>(sizes[l + 1]) * (static_cast<std::size_t>(sizes[l]) + 1);
    if (values * 8 > r.remaining()) throw FormatError("checkpoint: truncated file");
    Mat W(sizes[l + 1], sizes[l]);
    for (Eigen::Index row = 0; row < W.rows(); ++row) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(row, c) = r.f64();
    }
    Vec b(sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = r.f64();
    model.mlp.weights.push_back(std::move(W));
    model.mlp.biases.push_back(std::move(b));
  }
  model.fingerprint.n = static_cast<int>(n);
  model.fingerprint.system_name = r.bytes();
  model.fingerprint.config_hash = r.u64();
  model.summary.steps = r.i64();
  model.summary.final_loss = r.f64();
  model.summary.final_potential = r.f64();
  model.summary.final_penalty = r.f64();
  model.summary.final_log_ratio = r.f64();
  model.summary.energy_clamps = r.i64();
  if (r.remaining() != 8) throw FormatError("checkpoint: unexpected trailing bytes");
  try {
    model.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return model;
}

void save_model(const std::filesystem::path& path, const SubspaceModel& model) {
  const std::vector<unsigned char> bytes = encode_model(model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

SubspaceModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read model '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

SubspaceModel model_from_affine(const AffineSubspace& affine) {
  SubspaceModel model;
  model.d = affine.latent_dim();
  model.m = 0;
  model.sigma = affine.sigma;
  model.mlp.weights.push_back(affine.A);
  model.mlp.biases.push_back(affine.b);
  model.fingerprint.n = affine.config_dim();
  return model;
}

}  // namespace nsub
