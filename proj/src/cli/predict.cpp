#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "kpj/cli/commands.hpp"
#include "kpj/core/errors.hpp"

namespace kpj::cli {

using ad::Tensor;
using corpus::Example;
using nlohmann::ordered_json;

PrepareReport cmd_prepare(const std::string& input, const std::string& out_cache, const RunConfig& config) {
  config.validate();
  const corpus::Corpus c = input == "-" ? corpus::build_corpus(std::cin, config.vocab_size, config.max_len)
                                        : corpus::build_corpus(input, config.vocab_size, config.max_len);
  if (c.examples.empty()) throw FormatError("no usable records in " + input);
  corpus::save_cache(c, out_cache);
  return {c.examples.size(), c.skipped_records, c.empty_keyphrases, c.problems};
}

void cmd_make_toy(const std::string& out, std::uint64_t seed, std::size_t count) {
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + out);
  for (const auto& doc : corpus::make_toy_corpus(seed, count)) f << corpus::to_json_line(doc) << '\n';
}

RunConfig config_of(const Checkpoint& ckpt) {
  RunConfig c;
  c.apply_text(ckpt.config);
  return c;
}

pke::PkeModel load_pke(const Checkpoint& ckpt) {
  if (ckpt.kind != "pke") throw ConfigError("expected a pke checkpoint, got " + ckpt.kind);
  const RunConfig c = config_of(ckpt);
  pke::PkeModel model(c.pke_config(ckpt.encoder_vocab.size()), c.seed);
  restore_tensors(ckpt, model.encoder().params());
  restore_tensors(ckpt, model.head_params());
  return model;
}

LoadedAkg load_akg(const Checkpoint& ckpt) {
  if (ckpt.kind != "akg") throw ConfigError("expected an akg checkpoint, got " + ckpt.kind);
  const RunConfig c = config_of(ckpt);
  LoadedAkg out{c, akg::AkgModel(c.akg_config(ckpt.generator_vocab.size()), c.seed), std::nullopt,
                ckpt.encoder_vocab, ckpt.generator_vocab};
  restore_tensors(ckpt, out.model.params());
  if (c.fusion_enabled) {
    out.encoder.emplace(c.pke_config(ckpt.encoder_vocab.size()).encoder, c.seed);
    restore_tensors(ckpt, out.encoder->params());
    out.encoder->params().set_trainable(false);
  }
  return out;
}

Tensor shared_states(const pke::SharedEncoder& encoder, const Example& example,
                     const corpus::Vocabulary& encoder_vocab, const nn::ForwardContext& ctx) {
  const auto ids = encoder_vocab.encode(example.tokens);
  const auto marked = pke::mark_sentences(ids, example.sentences, encoder.config().max_len);
  return encoder(marked.ids, marked.segments, ctx);
}

SourceView source_view(const Example& example, const corpus::Vocabulary& generator_vocab) {
  SourceView v;
  v.map = akg::ExtendedVocabMap::build(example.tokens, generator_vocab);
  for (auto id : v.map.source_ids()) v.input_ids.push_back(v.map.input_id(id));
  return v;
}

std::string to_json_line(const DocumentPrediction& p) {
  ordered_json j;
  j["id"] = p.id;
  j["present"] = ordered_json::array();
  for (const auto& x : p.present) j["present"].push_back({{"phrase", x.phrase}, {"position", x.position}});
  j["absent"] = ordered_json::array();
  for (const auto& x : p.absent) j["absent"].push_back({{"phrase", x.phrase}, {"score", x.score}});
  j["selected_sentences"] = p.selected_sentences;
  return j.dump();
}

DocumentPrediction parse_prediction(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
    DocumentPrediction p;
    p.id = j.at("id").get<std::string>();
    for (const auto& x : j.at("present")) p.present.push_back({x.at("phrase"), x.at("position")});
    for (const auto& x : j.at("absent")) p.absent.push_back({x.at("phrase"), x.at("score")});
    if (j.contains("selected_sentences")) p.selected_sentences = j["selected_sentences"].get<std::vector<std::size_t>>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad prediction record: ") + e.what());
  }
}

Predictor Predictor::load(const std::string& pke_checkpoint, const std::string& akg_checkpoint,
                          const RunConfig& runtime) {
  Predictor p;
  p.runtime_ = runtime;
  const Checkpoint pk = load_checkpoint(pke_checkpoint);
  p.pke_ = std::make_unique<pke::PkeModel>(load_pke(pk));
  p.encoder_vocab_ = pk.encoder_vocab;
  p.max_len_ = config_of(pk).max_len;
  if (!akg_checkpoint.empty()) {
    const Checkpoint ak = load_checkpoint(akg_checkpoint);
    require_same_vocab(pk.encoder_vocab, ak.encoder_vocab, "pke/akg encoder");
    p.akg_ = std::make_unique<LoadedAkg>(load_akg(ak));
    if (runtime.beam_depth > p.akg_->config.beam_depth) {
      throw ConfigError("beam.depth " + std::to_string(runtime.beam_depth) + " exceeds the trained limit " +
                        std::to_string(p.akg_->config.beam_depth));
    }
  }
  return p;
}

namespace {

bool occurs_in(const corpus::Tokens& doc, const corpus::Tokens& phrase) {
  if (phrase.empty() || phrase.size() > doc.size()) return false;
  return std::search(doc.begin(), doc.end(), phrase.begin(), phrase.end()) != doc.end();
}

}  // namespace

DocumentPrediction Predictor::predict(const Example& example) const {
  DocumentPrediction out;
  out.id = example.id;
  const auto pred = pke_->predict(example, encoder_vocab_, runtime_.filter_k);
  out.selected_sentences = pred.selected;
  for (const auto& phrase : pred.phrases) out.present.push_back({corpus::join(phrase.tokens), phrase.position});
  if (!akg_) return out;

  ad::NoGradScope no_grad;
  const Tensor states = akg_->encoder ? shared_states(*akg_->encoder, example, akg_->encoder_vocab, {}) : Tensor();
  const SourceView source = source_view(example, akg_->generator_vocab);
  const Tensor memory = akg_->model.memory(source.input_ids, states, {});
  for (const auto& ranked : akg_->model.generate(memory, source.map, akg_->generator_vocab, runtime_.beam())) {
    corpus::Tokens words;
    for (auto id : ranked.tokens) words.push_back(source.map.surface(id, akg_->generator_vocab));
    if (runtime_.beam_filter_present && occurs_in(example.tokens, words)) continue;
    out.absent.push_back({corpus::join(words), ranked.score});
  }
  return out;
}

std::size_t cmd_predict(const std::string& input, const std::string& pke_checkpoint,
                        const std::string& akg_checkpoint, const RunConfig& config, std::ostream& out) {
  config.validate();
  const Predictor predictor = Predictor::load(pke_checkpoint, akg_checkpoint, config);
  std::ifstream file;
  if (input != "-") {
    file.open(input);
    if (!file) throw IoError("cannot read " + input);
  }
  std::istream& in = input == "-" ? std::cin : file;
  std::string line;
  std::size_t line_no = 0;
  std::size_t written = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    corpus::Example ex;
    try {
      const auto doc = corpus::parse_record(line, std::to_string(line_no - 1), false);
      ex = corpus::prepare_example(doc, predictor.max_len());
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    out << to_json_line(predictor.predict(ex)) << '\n';
    ++written;
  }
  return written;
}

}  // namespace kpj::cli
