#include "kpj/corpus/labels.hpp"

#include <algorithm>
#include <set>

#include "kpj/core/errors.hpp"

namespace kpj::corpus {

char tag_char(Tag t) {
  switch (t) {
    case Tag::O: return 'O';
    case Tag::B: return 'B';
    case Tag::I: return 'I';
  }
  return 'O';
}

Tag tag_from_char(char c) {
  switch (c) {
    case 'O': return Tag::O;
    case 'B': return Tag::B;
    case 'I': return Tag::I;
    default: throw FormatError(std::string("invalid IOB tag '") + c + "'");
  }
}

std::string tags_to_string(std::span<const Tag> tags) {
  std::string s;
  s.reserve(tags.size());
  for (Tag t : tags) s.push_back(tag_char(t));
  return s;
}

std::vector<Tag> tags_from_string(const std::string& s) {
  std::vector<Tag> tags;
  tags.reserve(s.size());
  for (char c : s) tags.push_back(tag_from_char(c));
  return tags;
}

std::vector<std::size_t> find_occurrences(std::span<const std::string> tokens,
                                          std::span<const std::string> phrase) {
  std::vector<std::size_t> out;
  if (phrase.empty() || phrase.size() > tokens.size()) return out;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
      out.push_back(i);
    }
  }
  return out;
}

PresentAbsentSplit split_present_absent(std::span<const std::string> tokens,
                                        const std::vector<Tokens>& keyphrases) {
  PresentAbsentSplit split;
  std::set<Tokens> seen;
  for (const auto& phrase : keyphrases) {
    if (phrase.empty()) {
      ++split.skipped_empty;
      continue;
    }
    if (!seen.insert(phrase).second) continue;
    auto positions = find_occurrences(tokens, phrase);
    if (positions.empty()) {
      split.absent.push_back(phrase);
    } else {
      split.present.push_back({phrase, std::move(positions)});
    }
  }
  return split;
}

std::vector<Occurrence> occurrences_of(const std::vector<PresentPhrase>& present) {
  std::vector<Occurrence> occ;
  for (const auto& p : present)
    for (auto pos : p.positions) occ.push_back({pos, p.tokens.size()});
  return occ;
}

IobLabels make_iob_labels(std::size_t token_count, std::vector<Occurrence> occurrences) {
  std::sort(occurrences.begin(), occurrences.end(), [](const Occurrence& a, const Occurrence& b) {
    return a.start != b.start ? a.start < b.start : a.length > b.length;
  });
  IobLabels out{std::vector<Tag>(token_count, Tag::O), {}};
  std::vector<bool> taken(token_count, false);
  for (const auto& occ : occurrences) {
    if (occ.length == 0 || occ.end() > token_count) {
      throw ContractError("occurrence [" + std::to_string(occ.start) + ", " +
                          std::to_string(occ.end()) + ") is outside " + std::to_string(token_count) +
                          " tokens");
    }
    bool clash = false;
    for (std::size_t i = occ.start; i < occ.end(); ++i) clash = clash || taken[i];
    if (clash) continue;
    for (std::size_t i = occ.start; i < occ.end(); ++i) {
      taken[i] = true;
      out.tags[i] = i == occ.start ? Tag::B : Tag::I;
    }
    out.kept.push_back(occ);
  }
  return out;
}

std::vector<std::uint8_t> make_sentence_labels(std::span<const Span> sentences,
                                               std::span<const Occurrence> occurrences) {
  std::vector<std::uint8_t> labels(sentences.size(), 0);
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const auto& occ : occurrences) {
      if (occ.start < sentences[s].end && sentences[s].begin < occ.end()) {
        labels[s] = 1;
        break;
      }
    }
  }
  return labels;
}

std::vector<ExtractedPhrase> extract_spans(std::span<const Tag> tags,
                                           std::span<const std::string> tokens) {
  if (tags.size() != tokens.size()) throw ContractError("extract_spans: tag/token length mismatch");
  std::vector<ExtractedPhrase> out;
  std::set<Tokens> seen;
  auto emit = [&](std::size_t begin, std::size_t end) {
    Tokens phrase(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                  tokens.begin() + static_cast<std::ptrdiff_t>(end));
    if (seen.insert(phrase).second) out.push_back({std::move(phrase), begin});
  };
  std::size_t open = tags.size();  // no span open
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const bool continues = tags[i] == Tag::I && open != tags.size();
    if (continues) continue;
    if (open != tags.size()) emit(open, i);
    open = tags[i] == Tag::O ? tags.size() : i;
  }
  if (open != tags.size()) emit(open, tags.size());
  return out;
}

}  // namespace kpj::corpus
