#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <unistd.h>

#include "kpj/cli/commands.hpp"
#include "kpj/core/errors.hpp"

using namespace kpj;
using namespace kpj::cli;
namespace fs = std::filesystem;

namespace {

const std::string kToyCorpus = std::string(KPJ_SOURCE_DIR) + "/data/toy_corpus.jsonl";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("kpj_unit_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

RunConfig small_config() {
  RunConfig c;
  for (const auto& [k, v] : std::vector<std::pair<const char*, const char*>>{
           {"encoder.width", "16"}, {"encoder.layers", "1"}, {"encoder.heads", "2"}, {"filter.heads", "2"},
           {"tagger.hidden", "8"}, {"akg.width", "16"}, {"akg.layers", "1"}, {"akg.heads", "2"},
           {"beam.width", "4"}, {"beam.depth", "3"}, {"pke.max_steps", "12"}, {"akg.max_steps", "12"},
           {"train.eval_every", "6"}, {"pke.warmup", "4"}, {"akg.warmup", "4"}}) {
    c.set(k, v);
  }
  return c;
}

}  // namespace

TEST_CASE("config rejects unknown keys and bad values") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("optim.learning_rate", "0.1"), ConfigError);
  CHECK_THROWS_AS(c.set("optim.lr", "fast"), ConfigError);
  CHECK_THROWS_AS(c.set("filter.enabled", "maybe"), ConfigError);
  CHECK_THROWS_AS(c.set("encoder.mode", "frozen"), ConfigError);
  CHECK_THROWS_AS(c.apply_text("seed=3\nprofile=paper\n"), ConfigError);
  CHECK_THROWS_AS(c.apply_text("no equals sign\n"), ConfigError);
  c.set("encoder.heads", "3");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("paper profile defaults") {
  const RunConfig p = RunConfig::paper();
  CHECK(p.lr == 0.001);
  CHECK(p.beta1 == 0.9);
  CHECK(p.beta2 == 0.998);
  CHECK(p.eps == 1e-9);
  CHECK(p.dropout == 0.1);
  CHECK(p.clip == 2.0);
  CHECK(p.filter_k == 7);
  CHECK(p.pke_warmup == 1000);
  CHECK(p.akg_warmup == 8000);
  CHECK(p.beam_width == 200);
  CHECK(p.beam_depth == 6);
  CHECK(p.max_len == 512);
  CHECK(p.tagger_hidden == 512);
  CHECK(p.akg_layers == 4);
  CHECK(p.akg_width == 768);
  CHECK(p.akg_heads == 8);
  CHECK_NOTHROW(p.validate());

  const RunConfig d = RunConfig::desk();
  CHECK(d.akg_layers == 2);
  CHECK(d.akg_width == 64);
  CHECK(d.akg_heads == 4);
  CHECK(d.beam_width == 16);
  CHECK(d.beam_depth == 6);
  CHECK(d.pke_warmup == 1000);
  CHECK(d.encoder_mode == EncoderMode::fixed_finetuned);
  CHECK_THROWS_AS(RunConfig::for_profile("laptop"), ConfigError);
}

TEST_CASE("config text round trip and resolution order") {
  RunConfig c = RunConfig::paper();
  c.set("eval.ks", "3,5,10");
  c.set("encoder.mode", "trainable");
  c.set("optim.lr", "0.00025");
  RunConfig back;
  back.apply_text(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.eval_ks == std::vector<std::size_t>{3, 5, 10});
  CHECK(back.encoder_mode == EncoderMode::trainable);
  for (const auto& key : RunConfig::keys()) CHECK(back.get(key) == c.get(key));

  TempDir dir("config");
  write_file(dir / "run.cfg", "# comment\nprofile=paper\nbeam.width=50\n\nseed=9\n");
  const RunConfig r = resolve_config("", dir / "run.cfg", {{"seed", "11"}});
  CHECK(r.profile == "paper");
  CHECK(r.beam_width == 50);
  CHECK(r.seed == 11);
  CHECK_THROWS_AS(resolve_config("desk", dir / "run.cfg", {}), ConfigError);
  CHECK_THROWS_AS(resolve_config("desk", "", {{"profile", "paper"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config("desk", dir / "missing.cfg", {}), IoError);
}

TEST_CASE("checkpoint round trip is byte-identical") {
  corpus::VocabularyBuilder b;
  b.count(std::vector<std::string>{"graph", "kernel", "graph"});
  Checkpoint c;
  c.kind = "pke";
  c.step = 42;
  c.config = RunConfig().to_text();
  c.encoder_vocab = b.build(10);
  c.generator_vocab = b.build(1);
  c.tensors.push_back({"a", {2, 2}, {1.0, -0.0, 1e-300, 3.141592653589793}});
  c.tensors.push_back({"b", {1}, {std::numeric_limits<double>::denorm_min()}});

  std::ostringstream first;
  write_checkpoint(c, first);
  CHECK(first.str().substr(0, 8) == std::string("KPJCKPT\0", 8));
  std::istringstream in(first.str());
  const Checkpoint back = read_checkpoint(in);
  CHECK(back.tensors == c.tensors);
  CHECK(back.encoder_vocab == c.encoder_vocab);
  CHECK(back.step == 42);
  std::ostringstream second;
  write_checkpoint(back, second);
  CHECK(second.str() == first.str());

  std::string truncated = first.str();
  truncated.resize(truncated.size() - 3);
  std::istringstream cut(truncated);
  CHECK_THROWS_AS(read_checkpoint(cut), FormatError);
  std::string bad = first.str();
  bad[0] = 'X';
  std::istringstream magic(bad);
  CHECK_THROWS_AS(read_checkpoint(magic), FormatError);

  // corrupt one vocabulary token: the stored hash no longer matches
  std::string tampered = first.str();
  const auto pos = tampered.find("graph");
  REQUIRE(pos != std::string::npos);
  tampered[pos] = 'G';
  std::istringstream vocab(tampered);
  CHECK_THROWS_AS(read_checkpoint(vocab), FormatError);

  CHECK_THROWS_AS(require_same_vocab(b.build(10), b.build(1), "encoder"), ConfigError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), IoError);
}

TEST_CASE("restore_tensors checks names and shapes") {
  ad::ParamStore store(1);
  store.add("w", {2, 3}, ad::Init::uniform);
  Checkpoint c;
  store_tensors(store, c.tensors);
  ad::ParamStore other(2);
  other.add("w", {2, 3}, ad::Init::uniform);
  restore_tensors(c, other);
  CHECK(std::vector<double>(other.get("w").data().begin(), other.get("w").data().end()) == c.tensors[0].values);
  ad::ParamStore wrong(3);
  wrong.add("w", {3, 2}, ad::Init::uniform);
  CHECK_THROWS_AS(restore_tensors(c, wrong), FormatError);
  ad::ParamStore extra(4);
  extra.add("v", {1}, ad::Init::zeros);
  CHECK_THROWS_AS(restore_tensors(c, extra), FormatError);
}

TEST_CASE("prepare is deterministic, truncates and reports skipped records") {
  TempDir dir("prepare");
  std::string long_doc;
  for (int i = 0; i < 600; ++i) long_doc += "tok" + std::string(1, static_cast<char>('a' + i % 26)) + " ";
  write_file(dir / "in.jsonl",
             R"({"id": "a", "title": "graph kernels", "abstract": "we study graph kernels .", "keyphrases": ["graph kernels"]})"
             "\n"
             R"({"id": "b", "title": "no phrases", "abstract": "missing field"})"
             "\n"
             R"({"id": "c", "title": "long", "abstract": ")" +
                 long_doc + R"(", "keyphrases": ["toka tokb"]})" + "\n");
  const auto r1 = cmd_prepare(dir / "in.jsonl", dir / "c1.jsonl", RunConfig());
  const auto r2 = cmd_prepare(dir / "in.jsonl", dir / "c2.jsonl", RunConfig());
  CHECK(r1.examples == 2);
  CHECK(r1.skipped == 1);
  REQUIRE(r1.problems.size() == 1);
  CHECK(r1.problems[0].find("keyphrases") != std::string::npos);
  CHECK(slurp(dir / "c1.jsonl") == slurp(dir / "c2.jsonl"));
  const auto cache = corpus::load_cache(dir / "c1.jsonl");
  CHECK(cache.examples[1].tokens.size() == 512);
}

TEST_CASE("prediction records round trip") {
  DocumentPrediction p{"doc-1", {{"graph kernels", 3}}, {{"support vector machines", -0.25}}, {0, 2}};
  const auto back = parse_prediction(to_json_line(p));
  CHECK(back.id == "doc-1");
  CHECK(back.present[0].phrase == "graph kernels");
  CHECK(back.present[0].position == 3);
  CHECK(back.absent[0].score == -0.25);
  CHECK(back.selected_sentences == std::vector<std::size_t>{0, 2});
  CHECK_THROWS_AS(parse_prediction("{\"id\": 3}"), FormatError);
}

TEST_CASE("evaluate checks ids and scores perfect predictions as 1") {
  TempDir dir("eval");
  cmd_prepare(kToyCorpus, dir / "cache.jsonl", RunConfig());
  const auto gold = corpus::load_cache(dir / "cache.jsonl").examples;
  std::vector<DocumentPrediction> preds;
  for (const auto& ex : gold) {
    DocumentPrediction p;
    p.id = ex.id;
    for (const auto& ph : ex.present) p.present.push_back({corpus::join(ph.tokens), ph.positions.front()});
    for (const auto& ph : ex.absent) p.absent.push_back({corpus::join(ph), 0.0});
    preds.push_back(p);
  }
  const auto report = evaluate(preds, gold, RunConfig());
  REQUIRE(report.rows.size() == 4);
  CHECK(report.rows[2].name == "F1@M");
  CHECK(*report.rows[2].score.f1.value == 1.0);
  CHECK(report.rows[3].name == "R@50");
  CHECK(*report.rows[3].score.recall.value == 1.0);
  std::size_t without_absent = 0;
  for (const auto& ex : gold) without_absent += ex.absent.empty() ? 1 : 0;
  CHECK(report.rows[3].score.recall.skipped == without_absent);
  CHECK(report.rows[3].score.recall.documents == gold.size() - without_absent);

  auto broken = preds;
  broken.pop_back();
  broken.push_back(preds.front());
  broken.back().id = "stranger";
  try {
    evaluate(broken, gold, RunConfig());
    FAIL("expected an id mismatch");
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(gold.back().id) != std::string::npos);
    CHECK(msg.find("stranger") != std::string::npos);
  }
  std::ostringstream jsonl;
  write_report(report, jsonl);
  CHECK(jsonl.str().find("F1@M") != std::string::npos);
  CHECK(format_report(report).find("1.0000") != std::string::npos);
}

TEST_CASE("training, prediction and sweep wiring on a small config") {
  TempDir dir("train");
  const RunConfig c = small_config();
  cmd_prepare(kToyCorpus, dir / "cache.jsonl", c);

  std::ostringstream log;
  const auto r1 = cmd_train_pke(dir / "cache.jsonl", c, dir / "pke1.bin", {"", &log});
  const auto r2 = cmd_train_pke(dir / "cache.jsonl", c, dir / "pke2.bin");
  CHECK(r1.steps == 12);
  CHECK(r1.losses == r2.losses);
  CHECK(slurp(dir / "pke1.bin") == slurp(dir / "pke2.bin"));
  CHECK(log.str().find("pke step") != std::string::npos);

  CHECK_THROWS_AS(cmd_train_akg(dir / "cache.jsonl", "", c, dir / "akg.bin"), ConfigError);
  CHECK_THROWS_AS(cmd_train_akg(dir / "cache.jsonl", dir / "missing.bin", c, dir / "akg.bin"), ConfigError);
  cmd_train_akg(dir / "cache.jsonl", dir / "pke1.bin", c, dir / "akg.bin");

  std::ostringstream a, b;
  CHECK(cmd_predict(kToyCorpus, dir / "pke1.bin", dir / "akg.bin", c, a) == 64);
  cmd_predict(kToyCorpus, dir / "pke1.bin", dir / "akg.bin", c, b);
  CHECK(a.str() == b.str());
  std::istringstream lines(a.str());
  std::string line;
  while (std::getline(lines, line)) CHECK(parse_prediction(line).absent.size() <= c.beam_width);

  RunConfig wide = c;
  wide.set("beam.depth", "4");
  CHECK_THROWS_AS(Predictor::load(dir / "pke1.bin", dir / "akg.bin", wide), ConfigError);
  CHECK_THROWS_AS(Predictor::load(dir / "akg.bin", "", c), ConfigError);

  const auto sweep = cmd_sweep_k(dir / "pke1.bin", dir / "cache.jsonl", 1, 12, c);
  REQUIRE(sweep.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(sweep[i].k == i + 1);
}

TEST_CASE("pke loss falls from the first epoch to the second on the toy corpus") {
  TempDir dir("epoch");
  RunConfig c;
  c.set("pke.max_steps", "128");
  c.set("train.eval_every", "1000");
  cmd_prepare(kToyCorpus, dir / "cache.jsonl", c);
  const auto r = cmd_train_pke(dir / "cache.jsonl", c, dir / "pke.bin");
  REQUIRE(r.losses.size() == 128);
  const double first = std::accumulate(r.losses.begin(), r.losses.begin() + 64, 0.0) / 64.0;
  const double second = std::accumulate(r.losses.begin() + 64, r.losses.end(), 0.0) / 64.0;
  CHECK(second < first);
}
