#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kpj/core/params.hpp"
#include "kpj/corpus/vocab.hpp"

namespace kpj::cli {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;

  bool operator==(const StoredTensor&) const = default;
};

/// Versioned little-endian container:
///   "KPJCKPT\0", u32 version, kind, u64 step, config text,
///   two vocabularies (u64 hash, u32 count, tokens),
///   u32 tensor count, then per tensor: name, u32 rank, u64 dims, f64 values.
/// Strings are u32 length + bytes.
struct Checkpoint {
  std::string kind;  // "pke" or "akg"
  std::uint64_t step = 0;
  std::string config;  // RunConfig::to_text() snapshot
  corpus::Vocabulary encoder_vocab;
  corpus::Vocabulary generator_vocab;
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
/// Throws FormatError on a bad magic, version, truncation or a stored
/// vocabulary hash that does not match its tokens.
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Appends every parameter of `store` (insertion order).
void store_tensors(const ad::ParamStore& store, std::vector<StoredTensor>& out);
/// Copies stored values into every parameter of `store`; all of them must be
/// present with matching shapes.
void restore_tensors(const Checkpoint& ckpt, ad::ParamStore& store);

/// Throws ConfigError naming `what` when the hashes differ.
void require_same_vocab(const corpus::Vocabulary& expected, const corpus::Vocabulary& actual,
                        const std::string& what);

}  // namespace kpj::cli
