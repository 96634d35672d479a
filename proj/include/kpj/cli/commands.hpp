#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kpj/akg/model.hpp"
#include "kpj/cli/checkpoint.hpp"
#include "kpj/cli/config.hpp"
#include "kpj/corpus/corpus.hpp"
#include "kpj/metrics/metrics.hpp"
#include "kpj/pke/model.hpp"

namespace kpj::cli {

// prepare / make-toy

struct PrepareReport {
  std::size_t examples = 0;
  std::size_t skipped = 0;
  std::size_t empty_keyphrases = 0;
  std::vector<std::string> problems;
};

PrepareReport cmd_prepare(const std::string& input, const std::string& out_cache, const RunConfig& config);
void cmd_make_toy(const std::string& out, std::uint64_t seed, std::size_t count);

// training

struct TrainOptions {
  std::string valid_cache;  // empty: validate on the training set
  std::ostream* log = nullptr;
};

struct TrainReport {
  std::int64_t steps = 0;
  std::int64_t best_step = 0;
  double best_score = 0.0;  // validation F1@M (pke) or -mean NLL per phrase (akg)
  bool early_stopped = false;
  std::vector<double> losses;  // one per optimizer step
};

TrainReport cmd_train_pke(const std::string& cache, const RunConfig& config, const std::string& out,
                          const TrainOptions& options = {});

/// `pke_checkpoint` may be empty when fusion is off or the encoder mode is
/// `fresh`; otherwise a missing checkpoint is a ConfigError.
TrainReport cmd_train_akg(const std::string& cache, const std::string& pke_checkpoint, const RunConfig& config,
                          const std::string& out, const TrainOptions& options = {});

// models from checkpoints

RunConfig config_of(const Checkpoint& ckpt);
pke::PkeModel load_pke(const Checkpoint& ckpt);

struct LoadedAkg {
  RunConfig config;
  akg::AkgModel model;
  std::optional<pke::SharedEncoder> encoder;  // present when fusion is on
  corpus::Vocabulary encoder_vocab;
  corpus::Vocabulary generator_vocab;
};

LoadedAkg load_akg(const Checkpoint& ckpt);

/// H for one document: the shared encoder over the marked token sequence.
ad::Tensor shared_states(const pke::SharedEncoder& encoder, const corpus::Example& example,
                         const corpus::Vocabulary& encoder_vocab, const nn::ForwardContext& ctx);

/// Generator input ids (copy ids folded to <unk>) and the extended map.
struct SourceView {
  akg::ExtendedVocabMap map;
  std::vector<std::size_t> input_ids;
};
SourceView source_view(const corpus::Example& example, const corpus::Vocabulary& generator_vocab);

// prediction

struct PresentPrediction {
  std::string phrase;
  std::size_t position = 0;
};

struct AbsentPrediction {
  std::string phrase;
  double score = 0.0;
};

struct DocumentPrediction {
  std::string id;
  std::vector<PresentPrediction> present;
  std::vector<AbsentPrediction> absent;
  std::vector<std::size_t> selected_sentences;
};

std::string to_json_line(const DocumentPrediction& p);
DocumentPrediction parse_prediction(const std::string& line);

class Predictor {
 public:
  /// `akg_checkpoint` may be empty (no absent predictions).
  static Predictor load(const std::string& pke_checkpoint, const std::string& akg_checkpoint,
                        const RunConfig& runtime);

  /// Present phrases in document order; absent candidates ranked (with
  /// beam.filter_present, candidates occurring verbatim in the document are
  /// dropped).
  DocumentPrediction predict(const corpus::Example& example) const;

  std::size_t max_len() const { return max_len_; }
  const pke::PkeModel& pke() const { return *pke_; }
  const corpus::Vocabulary& encoder_vocab() const { return encoder_vocab_; }

 private:
  Predictor() = default;

  RunConfig runtime_;
  std::size_t max_len_ = corpus::kDefaultMaxLen;
  std::unique_ptr<pke::PkeModel> pke_;
  corpus::Vocabulary encoder_vocab_;
  std::unique_ptr<LoadedAkg> akg_;
};

/// Reads raw JSON-lines records (`-` for stdin) and writes one prediction
/// per line. Returns the number of documents written.
std::size_t cmd_predict(const std::string& input, const std::string& pke_checkpoint,
                        const std::string& akg_checkpoint, const RunConfig& config, std::ostream& out);

// evaluation

struct MetricRow {
  std::string name;  // F1@5, F1@M, R@50 ...
  metrics::MacroDocScore score;
};

struct EvalReport {
  std::size_t documents = 0;
  std::vector<MetricRow> rows;
};

/// Predictions and gold must cover the same document ids.
EvalReport cmd_eval(const std::string& predictions, const std::string& gold_cache, const RunConfig& config);
EvalReport evaluate(const std::vector<DocumentPrediction>& predictions, const std::vector<corpus::Example>& gold,
                    const RunConfig& config);

struct SweepRow {
  std::size_t k = 0;
  metrics::MacroDocScore f1_at_m;
};

/// Re-runs extraction on the gold cache for each K in [lo, hi].
std::vector<SweepRow> cmd_sweep_k(const std::string& pke_checkpoint, const std::string& gold_cache,
                                  std::size_t lo, std::size_t hi, const RunConfig& config);

void write_report(const EvalReport& report, std::ostream& jsonl);
std::string format_report(const EvalReport& report);
void write_sweep(const std::vector<SweepRow>& rows, std::ostream& jsonl);
std::string format_sweep(const std::vector<SweepRow>& rows);

}  // namespace kpj::cli
