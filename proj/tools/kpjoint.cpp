// kpjoint: prepare, train, predict and evaluate from the command line.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "kpj/cli/commands.hpp"
#include "kpj/core/errors.hpp"

namespace {

using namespace kpj;

struct Common {
  std::string profile;
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  cli::RunConfig resolve() const {
    std::map<std::string, std::string> overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      overrides[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (seed) overrides["seed"] = std::to_string(*seed);
    return cli::resolve_config(profile, config_path, overrides);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--profile", c.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--config", c.config_path, "flat key=value config file");
  cmd->add_option("--set", c.sets, "override one key (key=value), repeatable");
  cmd->add_option("--seed", c.seed, "random seed");
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const auto k = std::stoul(s);
      return {k, k};
    }
    return {std::stoul(s.substr(0, dots)), std::stoul(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw ConfigError("--sweep-k expects LO..HI, got '" + s + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint present/absent keyphrase prediction"};
  app.require_subcommand(1);

  Common common;

  std::string toy_out;
  std::uint64_t toy_seed = 0;
  std::size_t toy_count = 64;
  auto* make_toy = app.add_subcommand("make-toy", "write the synthetic toy corpus");
  make_toy->add_option("--out", toy_out, "output JSONL")->required();
  make_toy->add_option("--seed", toy_seed, "generator seed");
  make_toy->add_option("--count", toy_count, "number of documents");

  std::string prep_in, prep_out;
  auto* prepare = app.add_subcommand("prepare", "normalize a JSONL corpus into a cache");
  prepare->add_option("--input", prep_in, "records, one JSON object per line (- for stdin)")->required();
  prepare->add_option("--out", prep_out, "cache path")->required();
  add_common(prepare, common);

  std::string train_cache, train_out, train_valid, train_pke;
  auto* train_pke_cmd = app.add_subcommand("train-pke", "train the extractor and shared encoder");
  train_pke_cmd->add_option("--cache", train_cache, "prepared cache")->required();
  train_pke_cmd->add_option("--out", train_out, "checkpoint path")->required();
  train_pke_cmd->add_option("--valid", train_valid, "validation cache (default: training cache)");
  add_common(train_pke_cmd, common);

  auto* train_akg_cmd = app.add_subcommand("train-akg", "train the generator against the shared encoder");
  train_akg_cmd->add_option("--cache", train_cache, "prepared cache")->required();
  train_akg_cmd->add_option("--pke", train_pke, "extractor checkpoint");
  train_akg_cmd->add_option("--out", train_out, "checkpoint path")->required();
  train_akg_cmd->add_option("--valid", train_valid, "validation cache (default: training cache)");
  add_common(train_akg_cmd, common);

  std::string pred_in = "-", pred_out, pred_pke, pred_akg;
  auto* predict = app.add_subcommand("predict", "extract present and generate absent keyphrases");
  predict->add_option("--input", pred_in, "records, one JSON object per line (- for stdin)");
  predict->add_option("--pke", pred_pke, "extractor checkpoint")->required();
  predict->add_option("--akg", pred_akg, "generator checkpoint");
  predict->add_option("--out", pred_out, "output JSONL (default stdout)");
  add_common(predict, common);

  std::string eval_preds, eval_gold, eval_report, eval_sweep, eval_pke;
  auto* eval = app.add_subcommand("eval", "score predictions against a gold cache");
  eval->add_option("--predictions", eval_preds, "prediction JSONL");
  eval->add_option("--gold", eval_gold, "gold cache")->required();
  eval->add_option("--report", eval_report, "write the JSONL report here");
  eval->add_option("--sweep-k", eval_sweep, "re-run extraction for K in LO..HI (needs --pke)");
  eval->add_option("--pke", eval_pke, "extractor checkpoint for --sweep-k");
  add_common(eval, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*make_toy) {
      cli::cmd_make_toy(toy_out, toy_seed, toy_count);
    } else if (*prepare) {
      const auto r = cli::cmd_prepare(prep_in, prep_out, common.resolve());
      for (const auto& p : r.problems) std::cerr << "skipped " << p << '\n';
      std::cerr << "prepared " << r.examples << " documents, skipped " << r.skipped << ", "
                << r.empty_keyphrases << " empty keyphrases dropped\n";
    } else if (*train_pke_cmd) {
      cli::TrainOptions opts{train_valid, &std::cerr};
      const auto r = cli::cmd_train_pke(train_cache, common.resolve(), train_out, opts);
      std::cerr << "best validation F1@M " << r.best_score << " at step " << r.best_step << '\n';
    } else if (*train_akg_cmd) {
      cli::TrainOptions opts{train_valid, &std::cerr};
      const auto r = cli::cmd_train_akg(train_cache, train_pke, common.resolve(), train_out, opts);
      std::cerr << "best validation score " << r.best_score << " at step " << r.best_step << '\n';
    } else if (*predict) {
      const auto config = common.resolve();
      if (pred_out.empty()) {
        cli::cmd_predict(pred_in, pred_pke, pred_akg, config, std::cout);
      } else {
        std::ofstream out(pred_out, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + pred_out);
        cli::cmd_predict(pred_in, pred_pke, pred_akg, config, out);
      }
    } else if (*eval) {
      const auto config = common.resolve();
      std::ofstream report;
      if (!eval_report.empty()) {
        report.open(eval_report, std::ios::binary | std::ios::trunc);
        if (!report) throw IoError("cannot write " + eval_report);
      }
      if (!eval_sweep.empty()) {
        if (eval_pke.empty()) throw ConfigError("--sweep-k needs --pke");
        const auto [lo, hi] = parse_range(eval_sweep);
        const auto rows = cli::cmd_sweep_k(eval_pke, eval_gold, lo, hi, config);
        std::cout << cli::format_sweep(rows);
        if (report.is_open()) cli::write_sweep(rows, report);
      } else {
        if (eval_preds.empty()) throw ConfigError("eval needs --predictions (or --sweep-k)");
        const auto r = cli::cmd_eval(eval_preds, eval_gold, config);
        std::cout << cli::format_report(r);
        if (report.is_open()) cli::write_report(r, report);
      }
    }
  } catch (const kpj::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
