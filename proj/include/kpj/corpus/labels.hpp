#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpj/corpus/text.hpp"

namespace kpj::corpus {

/// IOB tag; O must stay index 0 (Viterbi ties resolve toward it).
enum class Tag : std::uint8_t { O = 0, B = 1, I = 2 };
inline constexpr std::size_t kTagCount = 3;

char tag_char(Tag t);
Tag tag_from_char(char c);
std::string tags_to_string(std::span<const Tag> tags);
std::vector<Tag> tags_from_string(const std::string& s);

struct Occurrence {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  bool operator==(const Occurrence&) const = default;
};

struct PresentPhrase {
  Tokens tokens;
  std::vector<std::size_t> positions;  // every contiguous occurrence
};

struct PresentAbsentSplit {
  std::vector<PresentPhrase> present;
  std::vector<Tokens> absent;
  std::size_t skipped_empty = 0;
};

/// Start positions of every contiguous occurrence of `phrase` in `tokens`.
std::vector<std::size_t> find_occurrences(std::span<const std::string> tokens,
                                          std::span<const std::string> phrase);

/// Deduplicates normalised phrases (first wins), drops empty ones, then
/// splits them by whether they occur contiguously in `tokens`.
PresentAbsentSplit split_present_absent(std::span<const std::string> tokens,
                                        const std::vector<Tokens>& keyphrases);

std::vector<Occurrence> occurrences_of(const std::vector<PresentPhrase>& present);

struct IobLabels {
  std::vector<Tag> tags;
  std::vector<Occurrence> kept;  // occurrences that received tags
};

/// Tags each occurrence B I*; overlaps resolve earliest start, then
/// longest, and an occurrence touching an already tagged token is dropped.
IobLabels make_iob_labels(std::size_t token_count, std::vector<Occurrence> occurrences);

/// 1 for each sentence overlapped by at least one occurrence.
std::vector<std::uint8_t> make_sentence_labels(std::span<const Span> sentences,
                                               std::span<const Occurrence> occurrences);

struct ExtractedPhrase {
  Tokens tokens;
  std::size_t position = 0;

  bool operator==(const ExtractedPhrase&) const = default;
};

/// Maximal B I* runs in document order; an I that follows O (or starts the
/// sequence) opens a new span. Repeated surface phrases keep the first
/// position.
std::vector<ExtractedPhrase> extract_spans(std::span<const Tag> tags,
                                           std::span<const std::string> tokens);

}  // namespace kpj::corpus
