#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "kpj/cli/commands.hpp"
#include "kpj/core/errors.hpp"

namespace kpj::cli {

using corpus::Example;
using metrics::DocScore;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> gold_strings(const std::vector<corpus::PresentPhrase>& phrases) {
  std::vector<std::string> out;
  for (const auto& p : phrases) out.push_back(corpus::join(p.tokens));
  return out;
}

std::vector<std::string> gold_strings(const std::vector<corpus::Tokens>& phrases) {
  std::vector<std::string> out;
  for (const auto& p : phrases) out.push_back(corpus::join(p));
  return out;
}

std::string list_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < 10; ++i) s += (i ? ", " : "") + ids[i];
  if (ids.size() > 10) s += ", ... (" + std::to_string(ids.size()) + " total)";
  return s;
}

ordered_json value_or_null(const metrics::MacroScore& m) {
  return m.value ? ordered_json(*m.value) : ordered_json(nullptr);
}

std::string cell(const metrics::MacroScore& m) {
  if (!m.value) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *m.value);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

EvalReport evaluate(const std::vector<DocumentPrediction>& predictions, const std::vector<Example>& gold,
                    const RunConfig& config) {
  const auto eval = config.eval();
  eval.validate();
  std::map<std::string, const DocumentPrediction*> by_id;
  std::vector<std::string> duplicates, unknown, missing;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) duplicates.push_back(p.id);
  }
  std::map<std::string, bool> gold_ids;
  for (const auto& ex : gold) {
    gold_ids[ex.id] = true;
    if (!by_id.count(ex.id)) missing.push_back(ex.id);
  }
  for (const auto& p : predictions) {
    if (!gold_ids.count(p.id)) unknown.push_back(p.id);
  }
  if (!duplicates.empty() || !unknown.empty() || !missing.empty()) {
    std::string msg = "prediction/gold id mismatch:";
    if (!missing.empty()) msg += " no prediction for [" + list_ids(missing) + "]";
    if (!unknown.empty()) msg += " not in gold [" + list_ids(unknown) + "]";
    if (!duplicates.empty()) msg += " duplicated [" + list_ids(duplicates) + "]";
    throw ContractError(msg);
  }

  std::vector<std::vector<std::optional<DocScore>>> at_k(eval.ks.size());
  std::vector<std::optional<DocScore>> at_m, recall;
  for (const auto& ex : gold) {
    const DocumentPrediction& p = *by_id.at(ex.id);
    std::vector<std::string> present, absent;
    for (const auto& x : p.present) present.push_back(x.phrase);
    for (const auto& x : p.absent) absent.push_back(x.phrase);
    const auto gold_present = gold_strings(ex.present);
    const auto gold_absent = gold_strings(ex.absent);
    for (std::size_t i = 0; i < eval.ks.size(); ++i) {
      at_k[i].push_back(metrics::f1_at_k(present, gold_present, eval.ks[i], eval.match));
    }
    at_m.push_back(metrics::f1_at_m(present, gold_present, eval.match));
    recall.push_back(metrics::f1_at_k(absent, gold_absent, eval.recall_k, eval.match));
  }

  EvalReport report;
  report.documents = gold.size();
  for (std::size_t i = 0; i < eval.ks.size(); ++i) {
    report.rows.push_back({"F1@" + std::to_string(eval.ks[i]), metrics::macro_average(std::span(at_k[i]))});
  }
  report.rows.push_back({"F1@M", metrics::macro_average(std::span(at_m))});
  report.rows.push_back({"R@" + std::to_string(eval.recall_k), metrics::macro_average(std::span(recall))});
  return report;
}

EvalReport cmd_eval(const std::string& predictions, const std::string& gold_cache, const RunConfig& config) {
  std::ifstream in(predictions);
  if (!in) throw IoError("cannot read predictions " + predictions);
  std::vector<DocumentPrediction> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      preds.push_back(parse_prediction(line));
    } catch (const FormatError& e) {
      throw FormatError(predictions + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return evaluate(preds, corpus::load_cache(gold_cache).examples, config);
}

std::vector<SweepRow> cmd_sweep_k(const std::string& pke_checkpoint, const std::string& gold_cache,
                                  std::size_t lo, std::size_t hi, const RunConfig& config) {
  if (lo == 0 || lo > hi) {
    throw ConfigError("bad K range " + std::to_string(lo) + ".." + std::to_string(hi));
  }
  const auto eval = config.eval();
  const Checkpoint ckpt = load_checkpoint(pke_checkpoint);
  const pke::PkeModel model = load_pke(ckpt);
  const auto gold = corpus::load_cache(gold_cache).examples;
  std::vector<SweepRow> rows;
  for (std::size_t k = lo; k <= hi; ++k) {
    std::vector<std::optional<DocScore>> scores;
    for (const auto& ex : gold) {
      const auto pred = model.predict(ex, ckpt.encoder_vocab, k);
      std::vector<std::string> present;
      for (const auto& p : pred.phrases) present.push_back(corpus::join(p.tokens));
      scores.push_back(metrics::f1_at_m(present, gold_strings(ex.present), eval.match));
    }
    rows.push_back({k, metrics::macro_average(std::span(scores))});
  }
  return rows;
}

void write_report(const EvalReport& report, std::ostream& jsonl) {
  for (const auto& row : report.rows) {
    ordered_json j;
    j["metric"] = row.name;
    j["documents"] = row.score.f1.documents;
    j["skipped"] = row.score.f1.skipped;
    j["precision"] = value_or_null(row.score.precision);
    j["recall"] = value_or_null(row.score.recall);
    j["f1"] = value_or_null(row.score.f1);
    jsonl << j.dump() << '\n';
  }
}

std::string format_report(const EvalReport& report) {
  std::string out = pad("metric", 8) + pad("docs", 7) + pad("skipped", 9) + pad("precision", 11) +
                    pad("recall", 9) + pad("f1", 9) + "\n";
  for (const auto& row : report.rows) {
    out += pad(row.name, 8) + pad(std::to_string(row.score.f1.documents), 7) +
           pad(std::to_string(row.score.f1.skipped), 9) + pad(cell(row.score.precision), 11) +
           pad(cell(row.score.recall), 9) + pad(cell(row.score.f1), 9) + "\n";
  }
  return out;
}

void write_sweep(const std::vector<SweepRow>& rows, std::ostream& jsonl) {
  for (const auto& row : rows) {
    ordered_json j;
    j["K"] = row.k;
    j["f1_at_m"] = value_or_null(row.f1_at_m.f1);
    j["precision"] = value_or_null(row.f1_at_m.precision);
    j["recall"] = value_or_null(row.f1_at_m.recall);
    j["documents"] = row.f1_at_m.f1.documents;
    jsonl << j.dump() << '\n';
  }
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::string out = pad("K", 4) + pad("F1@M", 9) + pad("P", 9) + pad("R", 9) + "\n";
  for (const auto& row : rows) {
    out += pad(std::to_string(row.k), 4) + pad(cell(row.f1_at_m.f1), 9) + pad(cell(row.f1_at_m.precision), 9) +
           pad(cell(row.f1_at_m.recall), 9) + "\n";
  }
  return out;
}

}  // namespace kpj::cli
