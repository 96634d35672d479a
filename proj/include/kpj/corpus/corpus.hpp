#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kpj/corpus/labels.hpp"
#include "kpj/corpus/text.hpp"
#include "kpj/corpus/vocab.hpp"

namespace kpj::corpus {

inline constexpr std::size_t kDefaultMaxLen = 512;
inline constexpr int kCacheVersion = 1;

struct RawDocument {
  std::string id;
  std::string title;
  std::string abstract;
  std::vector<std::string> keyphrases;
};

/// A normalised document with its gold split and training labels.
struct Example {
  std::string id;
  Tokens tokens;
  std::vector<Span> sentences;
  std::vector<PresentPhrase> present;
  std::vector<Tokens> absent;
  std::vector<Tag> iob;
  std::vector<std::uint8_t> sentence_labels;
};

struct Corpus {
  std::vector<Example> examples;
  Vocabulary encoder_vocab;
  Vocabulary generator_vocab;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t skipped_records = 0;
  std::size_t empty_keyphrases = 0;
  std::vector<std::string> problems;  // one line per skipped record
};

/// Parses one JSON line with `title`, `abstract` and `keyphrases` (a list,
/// or a ';'-separated string). `id` is optional. Throws FormatError. When
/// `require_keyphrases` is false a missing field reads as empty.
RawDocument parse_record(const std::string& line, const std::string& fallback_id,
                         bool require_keyphrases = true);

/// Normalises "title . abstract", truncates to `max_len` tokens, splits
/// sentences and builds the present/absent split and labels.
Example prepare_example(const RawDocument& doc, std::size_t max_len = kDefaultMaxLen,
                        std::size_t* empty_keyphrases = nullptr);

/// Reads one record per line; malformed lines are skipped and counted.
/// Builds the encoder vocabulary from document tokens and the generator
/// vocabulary from document plus keyphrase tokens, each capped at
/// `vocab_size` non-reserved entries.
Corpus build_corpus(std::istream& in, std::size_t vocab_size, std::size_t max_len = kDefaultMaxLen);
Corpus build_corpus(const std::string& path, std::size_t vocab_size,
                    std::size_t max_len = kDefaultMaxLen);

/// JSON-lines cache: a header object (format, version, vocabularies), then
/// one object per example. Output is byte-deterministic.
void write_cache(const Corpus& corpus, std::ostream& out);
Corpus read_cache(std::istream& in);
void save_cache(const Corpus& corpus, const std::string& path);
Corpus load_cache(const std::string& path);

/// Synthetic scholarly-looking documents with controlled present and
/// absent keyphrases. Deterministic in (seed, count).
std::vector<RawDocument> make_toy_corpus(std::uint64_t seed, std::size_t count = 64);
std::string to_json_line(const RawDocument& doc);

}  // namespace kpj::corpus
