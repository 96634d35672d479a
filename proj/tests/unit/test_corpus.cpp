#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "kpj/core/errors.hpp"
#include "kpj/corpus/corpus.hpp"

using namespace kpj;
using namespace kpj::corpus;

namespace {

Tokens toks(std::initializer_list<const char*> words) { return Tokens(words.begin(), words.end()); }

std::vector<Span> spans(std::initializer_list<std::pair<std::size_t, std::size_t>> ps) {
  std::vector<Span> out;
  for (auto [b, e] : ps) out.push_back({b, e});
  return out;
}

std::size_t sentence_of(const Example& ex, std::size_t token) {
  for (std::size_t i = 0; i < ex.sentences.size(); ++i) {
    if (ex.sentences[i].begin <= token && token < ex.sentences[i].end) return i;
  }
  FAIL("token outside every sentence");
  return 0;
}

std::size_t find_token(const Example& ex, const Tokens& phrase) {
  const auto pos = find_occurrences(ex.tokens, phrase);
  REQUIRE_FALSE(pos.empty());
  return pos.front();
}

}  // namespace

TEST_CASE("normalize examples") {
  CHECK(normalize("Training 12 GPUs.") == toks({"training", "<digit>", "gpus", "."}));
  CHECK(normalize("").empty());
  CHECK(normalize("ABC abc") == toks({"abc", "abc"}));
  CHECK(normalize("x2y, (a)") == toks({"x", "<digit>", "y", ",", "(", "a", ")"}));
  CHECK(normalize("3.14") == toks({"<digit>", ".", "<digit>"}));
}

TEST_CASE("normalize is idempotent through join") {
  for (const char* text : {"Hybrid (or layered) normalisers; 42 steps!", "A-B c/d 1e5", "  spaced\tout\n"}) {
    const Tokens once = normalize(text);
    CHECK(normalize(join(once)) == once);
  }
}

TEST_CASE("split_sentences examples") {
  CHECK(split_sentences(toks({"a", ".", "b", "."})) == spans({{0, 2}, {2, 4}}));
  CHECK(split_sentences(toks({"a", "b", "c"})) == spans({{0, 3}}));
  CHECK(split_sentences(toks({"a", ".", ".", "b"})) == spans({{0, 2}, {2, 3}, {3, 4}}));
  CHECK(split_sentences(toks({"a", "!", "b", "?", "c", ";", "d"})) == spans({{0, 2}, {2, 4}, {4, 6}, {6, 7}}));
  CHECK(split_sentences(Tokens{}).empty());
}

TEST_CASE("sentence spans partition the document") {
  const Tokens t = normalize("one . two three ! ; four ? five");
  const auto s = split_sentences(t);
  std::size_t cursor = 0;
  for (const auto& span : s) {
    CHECK(span.begin == cursor);
    CHECK(span.size() > 0);
    cursor = span.end;
  }
  CHECK(cursor == t.size());
}

TEST_CASE("split_present_absent examples") {
  const Tokens doc = normalize("abstract machines for abstract machines and reduction");
  const auto split = split_present_absent(
      doc, {normalize("abstract machines"), normalize("operational semantics"), normalize("machines reduction"),
            normalize("Abstract Machines"), normalize("!"), Tokens{}});
  REQUIRE(split.present.size() == 1);
  CHECK(split.present[0].tokens == toks({"abstract", "machines"}));
  CHECK(split.present[0].positions == std::vector<std::size_t>{0, 3});
  CHECK(split.absent == std::vector<Tokens>{toks({"operational", "semantics"}), toks({"machines", "reduction"}),
                                            toks({"!"})});
  CHECK(split.skipped_empty == 1);

  const Tokens whole = toks({"a", "b"});
  const auto w = split_present_absent(whole, {whole});
  REQUIRE(w.present.size() == 1);
  CHECK(w.present[0].positions == std::vector<std::size_t>{0});
}

TEST_CASE("make_iob_labels examples") {
  const auto one = make_iob_labels(4, {{1, 2}});
  CHECK(tags_to_string(one.tags) == "OBIO");
  CHECK(tags_to_string(make_iob_labels(3, {}).tags) == "OOO");
  const auto overlap = make_iob_labels(4, {{2, 2}, {1, 2}});
  CHECK(tags_to_string(overlap.tags) == "OBIO");
  CHECK(overlap.kept == std::vector<Occurrence>{{1, 2}});
  const auto longest = make_iob_labels(5, {{1, 1}, {1, 3}});
  CHECK(tags_to_string(longest.tags) == "OBIIO");
  const auto adjacent = make_iob_labels(4, {{0, 2}, {2, 2}});
  CHECK(tags_to_string(adjacent.tags) == "BIBI");
}

TEST_CASE("extract_spans inverts make_iob_labels for kept occurrences") {
  const Tokens t = toks({"x", "a", "b", "y", "a", "b", "c", "d"});
  const auto labels = make_iob_labels(t.size(), {{1, 2}, {6, 1}, {3, 2}, {4, 2}});
  const auto spans = extract_spans(labels.tags, t);
  REQUIRE(spans.size() == labels.kept.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& occ = labels.kept[i];
    CHECK(spans[i].position == occ.start);
    CHECK(spans[i].tokens == Tokens(t.begin() + occ.start, t.begin() + occ.end()));
  }
}

TEST_CASE("extract_spans edge cases") {
  const Tokens t = toks({"a", "b", "c", "a", "b"});
  const auto s = extract_spans(tags_from_string("IIOBI"), t);
  REQUIRE(s.size() == 1);
  CHECK(s[0] == ExtractedPhrase{toks({"a", "b"}), 0});
  CHECK(extract_spans(tags_from_string("BBB"), toks({"a", "b", "c"})).size() == 3);
  CHECK_THROWS(tag_from_char('X'));
}

TEST_CASE("make_sentence_labels examples") {
  const auto s = spans({{0, 3}, {3, 5}, {5, 8}, {8, 10}});
  CHECK(make_sentence_labels(s, std::vector<Occurrence>{}) == std::vector<std::uint8_t>{0, 0, 0, 0});
  const std::vector<Occurrence> straddle{{7, 2}};
  CHECK(make_sentence_labels(s, straddle) == std::vector<std::uint8_t>{0, 0, 1, 1});
  const std::vector<Occurrence> inside{{0, 1}, {3, 2}};
  CHECK(make_sentence_labels(s, inside) == std::vector<std::uint8_t>{1, 1, 0, 0});
}

TEST_CASE("worked document: present/absent split and unlabeled sentences") {
  RawDocument doc;
  doc.id = "fig";
  doc.title =
      "On the syntactic and functional correspondence between hybrid (or layered) normalisers and abstract "
      "machines.";
  doc.abstract =
      "We show how to connect the syntactic and the functional correspondence for normalisers and abstract "
      "machines implementing hybrid (or layered) reduction strategies, ... Many fundamental strategies in the "
      "literature are hybrid, in particular, many full reducing strategies ... If we follow the standard program "
      "transformation steps the ... However, a solution is possible based on establishing the shape invariant of "
      "well formed continuation stacks. We illustrate the problem and the solution with the derivation of "
      "substitution based ... The machine we obtain is a substitution based, eval apply, open terms version of "
      "Pierre cregut's ...";
  doc.keyphrases = {"abstract machines", "reduction strategies", "program transformation", "operational semantics",
                    "full reduction"};
  const Example ex = prepare_example(doc);

  std::vector<Tokens> present;
  for (const auto& p : ex.present) present.push_back(p.tokens);
  CHECK(present == std::vector<Tokens>{toks({"abstract", "machines"}), toks({"reduction", "strategies"}),
                                       toks({"program", "transformation"})});
  CHECK(ex.absent == std::vector<Tokens>{toks({"operational", "semantics"}), toks({"full", "reduction"})});

  for (const Tokens& underlined : {toks({"many", "fundamental"}), toks({"however", ",", "a", "solution"}),
                                   toks({"we", "illustrate"}), toks({"the", "machine", "we", "obtain"})}) {
    INFO(join(underlined));
    CHECK(ex.sentence_labels[sentence_of(ex, find_token(ex, underlined))] == 0);
  }
  CHECK(ex.sentence_labels[0] == 1);
  CHECK(ex.sentence_labels[sentence_of(ex, find_token(ex, toks({"program", "transformation"})))] == 1);
  CHECK(std::count(ex.iob.begin(), ex.iob.end(), Tag::B) == 4);
}

TEST_CASE("long documents are truncated to max_len") {
  RawDocument doc;
  doc.title = "title";
  std::string body;
  for (int i = 0; i < 598; ++i) body += "w" + std::string(1, static_cast<char>('a' + i % 26)) + " ";
  doc.abstract = body;
  doc.keyphrases = {"wa wb"};
  const Example full = prepare_example(doc, 1000);
  CHECK(full.tokens.size() == 600);
  const Example ex = prepare_example(doc);
  CHECK(ex.tokens.size() == 512);
  CHECK(ex.iob.size() == 512);
  CHECK(ex.sentences.back().end == 512);
}

TEST_CASE("vocabulary rules") {
  Vocabulary empty;
  CHECK(empty.size() == Vocabulary::kReservedCount);
  CHECK(empty.token(Vocabulary::kCls) == "[CLS]");
  CHECK(empty.id("unseen") == Vocabulary::kUnk);

  VocabularyBuilder b;
  b.count(toks({"c", "a", "b", "a", "e", "d", "b"}));
  const Vocabulary v = b.build(10);
  CHECK(v.size() == 5 + Vocabulary::kReservedCount);
  CHECK(v.token(6) == "a");
  CHECK(v.token(7) == "b");
  CHECK(v.token(8) == "c");
  CHECK(v.token(9) == "e");
  CHECK(v.token(10) == "d");
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.id(v.token(i)) == i);
  CHECK(b.build(2).size() == 2 + Vocabulary::kReservedCount);
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
  CHECK(Vocabulary::from_tokens(v.tokens()).hash() == v.hash());
  CHECK_THROWS(Vocabulary::from_tokens({"a"}));
}

TEST_CASE("build_corpus skips malformed records and is deterministic") {
  const std::string input =
      R"({"title": "Graph kernels", "abstract": "We study graph kernels. Kernels help.", "keyphrases": ["graph kernels", "svm"]})"
      "\n"
      "not json\n"
      R"({"title": "", "abstract": "x", "keyphrases": []})"
      "\n"
      R"({"title": "Mining", "abstract": "Frequent itemsets.", "keyphrases": "frequent itemsets; apriori"})"
      "\n";
  std::istringstream a(input), b(input);
  const Corpus c1 = build_corpus(a, 100);
  const Corpus c2 = build_corpus(b, 100);
  CHECK(c1.examples.size() == 2);
  CHECK(c1.skipped_records == 2);
  CHECK(c1.problems.size() == 2);
  CHECK(c1.encoder_vocab == c2.encoder_vocab);
  CHECK(c1.generator_vocab == c2.generator_vocab);
  CHECK(c1.generator_vocab.contains("svm"));
  CHECK_FALSE(c1.encoder_vocab.contains("svm"));
  CHECK(c1.examples[1].absent == std::vector<Tokens>{toks({"apriori"})});

  std::ostringstream s1, s2;
  write_cache(c1, s1);
  write_cache(c2, s2);
  CHECK(s1.str() == s2.str());
  std::istringstream back(s1.str());
  const Corpus r = read_cache(back);
  std::ostringstream s3;
  write_cache(r, s3);
  CHECK(s3.str() == s1.str());
  CHECK(r.examples[0].iob == c1.examples[0].iob);
  CHECK(r.examples[0].sentence_labels == c1.examples[0].sentence_labels);
}

TEST_CASE("cache rejects a wrong version") {
  std::istringstream bad(R"({"format": "kpj-cache", "version": 99})");
  CHECK_THROWS_AS(read_cache(bad), FormatError);
}

TEST_CASE("toy corpus has controlled present and absent phrases") {
  const auto docs = make_toy_corpus(0, 64);
  CHECK(docs.size() == 64);
  std::size_t with_absent = 0;
  for (const auto& d : docs) {
    const Example ex = prepare_example(d);
    CHECK_FALSE(ex.present.empty());
    with_absent += ex.absent.empty() ? 0 : 1;
  }
  CHECK(with_absent > 32);
  CHECK(to_json_line(make_toy_corpus(0, 1)[0]) == to_json_line(docs[0]));
}
