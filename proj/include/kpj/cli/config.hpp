#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kpj/akg/beam.hpp"
#include "kpj/akg/model.hpp"
#include "kpj/core/optim.hpp"
#include "kpj/metrics/metrics.hpp"
#include "kpj/pke/model.hpp"

namespace kpj::cli {

enum class EncoderMode { fixed_finetuned, trainable, fresh };

std::string_view encoder_mode_name(EncoderMode mode);

/// Flat key=value run configuration. Every key has a default from the
/// selected profile; unknown keys are rejected.
struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;

  std::size_t max_len = 512;
  std::size_t vocab_size = 5000;

  std::size_t encoder_width = 64;
  std::size_t encoder_layers = 2;
  std::size_t encoder_heads = 4;
  std::size_t encoder_ff = 0;
  EncoderMode encoder_mode = EncoderMode::fixed_finetuned;

  bool filter_enabled = true;
  std::size_t filter_k = 7;
  std::size_t filter_heads = 4;
  bool filter_strict = false;
  bool tagger_crf = true;
  std::size_t tagger_hidden = 32;

  std::size_t akg_width = 64;
  std::size_t akg_layers = 2;
  std::size_t akg_heads = 4;
  std::size_t akg_ff = 0;
  bool fusion_enabled = true;
  std::size_t beam_width = 16;
  std::size_t beam_depth = 6;
  bool beam_filter_present = false;

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.998;
  double eps = 1e-9;
  double clip = 2.0;
  ad::LrSchedule schedule = ad::LrSchedule::constant;
  std::int64_t pke_warmup = 1000;
  std::int64_t akg_warmup = 400;
  double dropout = 0.1;

  std::int64_t pke_max_steps = 2000;
  std::int64_t akg_max_steps = 1500;
  std::size_t batch = 1;
  std::int64_t eval_every = 64;
  std::int64_t patience = 8;
  std::int64_t log_every = 50;

  std::vector<std::size_t> eval_ks{5, 10};
  std::size_t recall_k = 50;
  bool eval_stem = false;
  bool eval_dedup = true;

  static RunConfig desk();
  static RunConfig paper();
  static RunConfig for_profile(std::string_view name);

  /// Sets one key from its textual value. Throws ConfigError for unknown
  /// keys and unparsable values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  /// Applies `key=value` lines; blank lines and `#` comments are ignored.
  /// A `profile` line, if present, must come first and resets the defaults.
  void apply_text(std::string_view text);
  void apply_file(const std::string& path);

  /// Every key in a fixed order, one `key=value` per line.
  std::string to_text() const;

  void validate() const;

  pke::PkeConfig pke_config(std::size_t encoder_vocab) const;
  akg::AkgConfig akg_config(std::size_t generator_vocab) const;
  ad::AdamConfig adam(std::int64_t warmup) const;
  akg::BeamConfig beam() const { return {beam_width, beam_depth}; }
  metrics::EvalConfig eval() const;
};

/// Profile from `--profile` (or the config file's first line), then the
/// file, then individual overrides.
RunConfig resolve_config(const std::string& profile, const std::string& config_path,
                         const std::map<std::string, std::string>& overrides);

}  // namespace kpj::cli
