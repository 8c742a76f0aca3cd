#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "entail/encoder.hpp"
#include "entail/error.hpp"
#include "entail/optimizer.hpp"
#include "entail/text.hpp"

namespace entail {

namespace fs = std::filesystem;

inline constexpr std::string_view kModelContrastive = "ConEntail";
inline constexpr std::string_view kModelEfl = "EFL";

// Encoder weights and vocabulary, optional classification head (EFL), optimizer
// state and provenance. Stored as raw little-endian doubles, so a reload
// reproduces encodings bit for bit.
struct Checkpoint {
  std::string model = std::string(kModelContrastive);
  ToyEncoder encoder;
  Vec head;  // EFL: out_dim weights followed by one bias
  AdamW optimizer;
  std::uint64_t step = 0;
  std::string config_hash;

  explicit Checkpoint(ToyEncoder enc) : encoder(std::move(enc)) {}

  std::string fingerprint() const {
    auto h = fnv1a(model);
    h = fnv1a({reinterpret_cast<const char*>(encoder.params().data()),
               encoder.params().size() * sizeof(double)},
              h);
    h = fnv1a({reinterpret_cast<const char*>(head.data()), head.size() * sizeof(double)}, h);
    return hex64(h);
  }
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'E', 'N', 'T', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class BinWriter {
 public:
  explicit BinWriter(std::ostream& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void vec(const std::vector<double>& v) {
    u64(v.size());
    bytes(v.data(), v.size() * sizeof(double));
  }

 private:
  std::ostream& out_;
};

class BinReader {
 public:
  explicit BinReader(std::istream& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw Error("checkpoint: truncated file");
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = u64();
    if (n > (1u << 20)) throw Error("checkpoint: corrupt string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::vector<double> vec() {
    const auto n = u64();
    if (n > (1ull << 32)) throw Error("checkpoint: corrupt vector length");
    std::vector<double> v(n);
    bytes(v.data(), n * sizeof(double));
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace detail

static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");

// Writes to a temporary sibling and renames it into place.
inline void save_checkpoint(const Checkpoint& ck, const fs::path& file) {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    detail::BinWriter w(out);
    w.bytes(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
    w.u64(detail::kCheckpointVersion);
    w.str(ck.model);
    w.str(ck.config_hash);
    w.u64(ck.step);
    w.u64(ck.encoder.shape().embed_dim);
    w.u64(ck.encoder.shape().out_dim);
    const auto& vocab = ck.encoder.tokenizer().vocab();
    w.u64(vocab.size());
    for (const auto& t : vocab) w.str(t);
    w.vec(ck.encoder.params());
    w.vec(ck.head);
    const auto& oc = ck.optimizer.config();
    w.f64(oc.beta1);
    w.f64(oc.beta2);
    w.f64(oc.eps);
    w.f64(oc.weight_decay);
    w.u64(ck.optimizer.steps());
    w.vec(ck.optimizer.first_moment());
    w.vec(ck.optimizer.second_moment());
    if (!out) throw Error("failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, file);
}

inline Checkpoint load_checkpoint(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + file.string());
  detail::BinReader r(in);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0) {
    throw Error(file.string() + " is not a checkpoint");
  }
  if (r.u64() != detail::kCheckpointVersion) throw Error("unsupported checkpoint version");
  auto model = r.str();
  auto cfg_hash = r.str();
  const auto step = r.u64();
  ToyEncoderShape shape;
  shape.embed_dim = r.u64();
  shape.out_dim = r.u64();
  const auto nvocab = r.u64();
  std::vector<std::string> vocab;
  vocab.reserve(nvocab);
  for (std::uint64_t i = 0; i < nvocab; ++i) vocab.push_back(r.str());
  auto params = r.vec();
  Checkpoint ck(ToyEncoder(Tokenizer::from_vocab(std::move(vocab)), shape, std::move(params)));
  ck.model = std::move(model);
  ck.config_hash = std::move(cfg_hash);
  ck.step = step;
  ck.head = r.vec();
  AdamWConfig oc;
  oc.beta1 = r.f64();
  oc.beta2 = r.f64();
  oc.eps = r.f64();
  oc.weight_decay = r.f64();
  const auto t = r.u64();
  auto m = r.vec();
  auto v = r.vec();
  ck.optimizer = AdamW(m.size(), oc);
  ck.optimizer.restore(t, std::move(m), std::move(v));
  return ck;
}

}  // namespace entail
