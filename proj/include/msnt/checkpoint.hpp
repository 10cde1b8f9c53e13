#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "msnt/model.hpp"

namespace msnt {

inline constexpr char kCheckpointMagic[4] = {'M', 'S', 'N', 'T'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, version, truncated, vocab_mismatch, malformed };
  CheckpointError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Layout, all integers little-endian:
//   "MSNT" | u16 version
//   config: u32 layers, hidden, heads, ff, vocab, max_seq_len, embedding_size;
//           f64 dropout; u8 share_parameters
//   u8 variant tag | u64 vocab hash | u32 block count
//   per block: u16 name length, name, u8 ndim, u32 extents..., f64 values
std::string serialize_checkpoint(const SentimentModel& model);
SentimentModel deserialize_checkpoint(const std::string& bytes,
                                      std::optional<std::uint64_t> expected_vocab_hash = {});

void save_checkpoint(const SentimentModel& model, const std::filesystem::path& path);
// With `expected_vocab_hash`, a model built against a different vocab is
// rejected with Kind::vocab_mismatch.
SentimentModel load_checkpoint(const std::filesystem::path& path,
                               std::optional<std::uint64_t> expected_vocab_hash = {});

}  // namespace msnt
