#include "msnt/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace msnt {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    bytes_.append(raw, sizeof(T));
  }
  void put_bytes(std::string_view s) { bytes_.append(s); }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::truncated, "checkpoint is truncated");
    }
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const SentimentModel& model) {
  Writer w;
  w.put_bytes(std::string_view(kCheckpointMagic, 4));
  w.put<std::uint16_t>(kCheckpointVersion);
  const EncoderConfig& c = model.config;
  for (std::size_t v : {c.num_layers, c.hidden_size, c.num_heads, c.ff_size, c.vocab_size,
                        c.max_seq_len, c.embedding_size}) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v));
  }
  w.put<double>(c.dropout_rate);
  w.put<std::uint8_t>(c.share_parameters ? 1 : 0);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.variant.name));
  w.put<std::uint64_t>(model.vocab_hash);
  const auto params = model.named_parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.ndim()));
    for (std::size_t e : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
    for (double v : t.data()) w.put<double>(v);
  }
  return w.take();
}

SentimentModel deserialize_checkpoint(const std::string& bytes,
                                      std::optional<std::uint64_t> expected_vocab_hash) {
  using Kind = CheckpointError::Kind;
  Reader r(bytes);
  // A file cut off inside the magic itself is truncated, not foreign.
  const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
  if (std::memcmp(bytes.data(), kCheckpointMagic, head) != 0) {
    throw CheckpointError(Kind::bad_magic, "not a checkpoint: bad magic bytes");
  }
  if (bytes.size() < 4) throw CheckpointError(Kind::truncated, "checkpoint is truncated");
  r.get_bytes(4);
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version, "unsupported checkpoint version " + std::to_string(version));
  }
  EncoderConfig c;
  c.num_layers = r.get<std::uint32_t>();
  c.hidden_size = r.get<std::uint32_t>();
  c.num_heads = r.get<std::uint32_t>();
  c.ff_size = r.get<std::uint32_t>();
  c.vocab_size = r.get<std::uint32_t>();
  c.max_seq_len = r.get<std::uint32_t>();
  c.embedding_size = r.get<std::uint32_t>();
  c.dropout_rate = r.get<double>();
  c.share_parameters = r.get<std::uint8_t>() != 0;
  const auto tag = r.get<std::uint8_t>();
  if (tag > static_cast<std::uint8_t>(VariantName::robertalike)) {
    throw CheckpointError(Kind::malformed, "unknown variant tag " + std::to_string(tag));
  }
  const std::uint64_t vocab_hash = r.get<std::uint64_t>();
  if (expected_vocab_hash && *expected_vocab_hash != vocab_hash) {
    throw CheckpointError(Kind::vocab_mismatch,
                          "checkpoint was built against a different vocabulary");
  }

  SentimentModel model;
  try {
    model = init_model(c, VariantSpec::of(static_cast<VariantName>(tag)), 0);
  } catch (const std::exception& e) {
    throw CheckpointError(Kind::malformed, std::string("checkpoint config invalid: ") + e.what());
  }
  model.vocab_hash = vocab_hash;

  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : model.named_parameters()) by_name.emplace(name, t);
  const auto count = r.get<std::uint32_t>();
  if (count != by_name.size()) {
    throw CheckpointError(Kind::malformed, "checkpoint holds " + std::to_string(count) +
                                               " parameter blocks, expected " +
                                               std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_bytes(r.get<std::uint16_t>());
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw CheckpointError(Kind::malformed, "unexpected parameter block '" + name + "'");
    }
    Shape shape(r.get<std::uint8_t>());
    for (std::size_t& e : shape) e = r.get<std::uint32_t>();
    Tensor& target = it->second;
    if (shape != target.shape()) {
      throw CheckpointError(Kind::malformed, "parameter '" + name + "' has shape " +
                                                 shape_to_string(shape) + ", expected " +
                                                 shape_to_string(target.shape()));
    }
    for (double& v : target.mutable_data()) v = r.get<double>();
  }
  if (!r.done()) throw CheckpointError(Kind::malformed, "trailing bytes after checkpoint");
  return model;
}

void save_checkpoint(const SentimentModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + path.string());
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "failed writing " + path.string());
}

SentimentModel load_checkpoint(const std::filesystem::path& path,
                               std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str(), expected_vocab_hash);
}

}  // namespace msnt
