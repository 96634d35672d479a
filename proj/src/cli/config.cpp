#include "kpj/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "kpj/core/errors.hpp"

namespace kpj::cli {

std::string_view encoder_mode_name(EncoderMode mode) {
  switch (mode) {
    case EncoderMode::fixed_finetuned: return "fixed-finetuned";
    case EncoderMode::trainable: return "trainable";
    case EncoderMode::fresh: return "fresh";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                    std::string(want) + ")");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field size_field(std::string key, T RunConfig::*member) {
  return {key, [key, member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) { return fmt_int(c.*member); }};
}

Field double_field(std::string key, double RunConfig::*member) {
  return {key, [key, member](RunConfig& c, std::string_view v) { c.*member = parse_number<double>(key, v); },
          [member](const RunConfig& c) { return fmt(c.*member); }};
}

Field bool_field(std::string key, bool RunConfig::*member) {
  return {key, [key, member](RunConfig& c, std::string_view v) { c.*member = parse_bool(key, v); },
          [member](const RunConfig& c) { return fmt(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"profile",
                 [](RunConfig& c, std::string_view v) {
                   if (v != c.profile) throw ConfigError("profile must be the first setting");
                 },
                 [](const RunConfig& c) { return c.profile; }});
    f.push_back(size_field("seed", &RunConfig::seed));
    f.push_back(size_field("data.max_len", &RunConfig::max_len));
    f.push_back(size_field("data.vocab_size", &RunConfig::vocab_size));
    f.push_back(size_field("encoder.width", &RunConfig::encoder_width));
    f.push_back(size_field("encoder.layers", &RunConfig::encoder_layers));
    f.push_back(size_field("encoder.heads", &RunConfig::encoder_heads));
    f.push_back(size_field("encoder.ff_inner", &RunConfig::encoder_ff));
    f.push_back({"encoder.mode",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "fixed-finetuned") c.encoder_mode = EncoderMode::fixed_finetuned;
                   else if (v == "trainable") c.encoder_mode = EncoderMode::trainable;
                   else if (v == "fresh") c.encoder_mode = EncoderMode::fresh;
                   else bad_value("encoder.mode", v, "fixed-finetuned, trainable or fresh");
                 },
                 [](const RunConfig& c) { return std::string(encoder_mode_name(c.encoder_mode)); }});
    f.push_back(bool_field("filter.enabled", &RunConfig::filter_enabled));
    f.push_back(size_field("filter.k", &RunConfig::filter_k));
    f.push_back(size_field("filter.heads", &RunConfig::filter_heads));
    f.push_back(bool_field("filter.strict_loss", &RunConfig::filter_strict));
    f.push_back(bool_field("tagger.crf", &RunConfig::tagger_crf));
    f.push_back(size_field("tagger.hidden", &RunConfig::tagger_hidden));
    f.push_back(size_field("akg.width", &RunConfig::akg_width));
    f.push_back(size_field("akg.layers", &RunConfig::akg_layers));
    f.push_back(size_field("akg.heads", &RunConfig::akg_heads));
    f.push_back(size_field("akg.ff_inner", &RunConfig::akg_ff));
    f.push_back(bool_field("fusion.enabled", &RunConfig::fusion_enabled));
    f.push_back(size_field("beam.width", &RunConfig::beam_width));
    f.push_back(size_field("beam.depth", &RunConfig::beam_depth));
    f.push_back(bool_field("beam.filter_present", &RunConfig::beam_filter_present));
    f.push_back(double_field("optim.lr", &RunConfig::lr));
    f.push_back(double_field("optim.beta1", &RunConfig::beta1));
    f.push_back(double_field("optim.beta2", &RunConfig::beta2));
    f.push_back(double_field("optim.eps", &RunConfig::eps));
    f.push_back(double_field("optim.clip", &RunConfig::clip));
    f.push_back({"optim.schedule",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "constant") c.schedule = ad::LrSchedule::constant;
                   else if (v == "inverse_sqrt") c.schedule = ad::LrSchedule::inverse_sqrt;
                   else bad_value("optim.schedule", v, "constant or inverse_sqrt");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.schedule == ad::LrSchedule::constant ? "constant" : "inverse_sqrt");
                 }});
    f.push_back(size_field("pke.warmup", &RunConfig::pke_warmup));
    f.push_back(size_field("akg.warmup", &RunConfig::akg_warmup));
    f.push_back(double_field("dropout", &RunConfig::dropout));
    f.push_back(size_field("pke.max_steps", &RunConfig::pke_max_steps));
    f.push_back(size_field("akg.max_steps", &RunConfig::akg_max_steps));
    f.push_back(size_field("train.batch", &RunConfig::batch));
    f.push_back(size_field("train.eval_every", &RunConfig::eval_every));
    f.push_back(size_field("train.patience", &RunConfig::patience));
    f.push_back(size_field("train.log_every", &RunConfig::log_every));
    f.push_back({"eval.ks",
                 [](RunConfig& c, std::string_view v) {
                   std::vector<std::size_t> ks;
                   std::size_t start = 0;
                   while (start <= v.size()) {
                     const auto comma = v.find(',', start);
                     const auto end = comma == std::string_view::npos ? v.size() : comma;
                     ks.push_back(parse_number<std::size_t>("eval.ks", trim(v.substr(start, end - start))));
                     start = end + 1;
                   }
                   c.eval_ks = std::move(ks);
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.eval_ks.size(); ++i) s += (i ? "," : "") + std::to_string(c.eval_ks[i]);
                   return s;
                 }});
    f.push_back(size_field("eval.recall_k", &RunConfig::recall_k));
    f.push_back(bool_field("eval.stem", &RunConfig::eval_stem));
    f.push_back(bool_field("eval.dedup", &RunConfig::eval_dedup));
    return f;
  }();
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

RunConfig RunConfig::desk() { return RunConfig{}; }

RunConfig RunConfig::paper() {
  RunConfig c;
  c.profile = "paper";
  c.vocab_size = 50000;
  c.encoder_width = 768;
  c.encoder_layers = 12;
  c.encoder_heads = 12;
  c.filter_heads = 8;
  c.tagger_hidden = 512;
  c.akg_width = 768;
  c.akg_layers = 4;
  c.akg_heads = 8;
  c.beam_width = 200;
  c.pke_warmup = 1000;
  c.akg_warmup = 8000;
  c.pke_max_steps = 100000;
  c.akg_max_steps = 200000;
  c.batch = 16;
  c.eval_every = 2000;
  c.patience = 10;
  c.log_every = 100;
  return c;
}

RunConfig RunConfig::for_profile(std::string_view name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ConfigError("unknown profile '" + std::string(name) + "' (expected desk or paper)");
}

void RunConfig::set(std::string_view key, std::string_view value) { field(key).set(*this, trim(value)); }

std::string RunConfig::get(std::string_view key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return names;
}

void RunConfig::apply_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "profile") {
      if (!first && value != profile) throw ConfigError("profile must be the first setting");
      if (value != profile) *this = for_profile(value);
    } else {
      set(key, value);
    }
    first = false;
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  auto positive = [](std::string_view key, auto v) {
    if (v <= 0) throw ConfigError(std::string(key) + " must be positive");
  };
  positive("data.max_len", max_len);
  positive("data.vocab_size", vocab_size);
  positive("encoder.width", encoder_width);
  positive("encoder.layers", encoder_layers);
  positive("encoder.heads", encoder_heads);
  positive("filter.k", filter_k);
  positive("filter.heads", filter_heads);
  positive("tagger.hidden", tagger_hidden);
  positive("akg.width", akg_width);
  positive("akg.layers", akg_layers);
  positive("akg.heads", akg_heads);
  positive("beam.width", beam_width);
  positive("beam.depth", beam_depth);
  positive("optim.lr", lr);
  positive("optim.eps", eps);
  positive("optim.clip", clip);
  positive("train.batch", batch);
  positive("train.eval_every", eval_every);
  positive("train.log_every", log_every);
  positive("eval.recall_k", recall_k);
  if (pke_warmup < 0 || akg_warmup < 0) throw ConfigError("warmup steps must be >= 0");
  if (pke_max_steps < 0 || akg_max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (patience < 0) throw ConfigError("train.patience must be >= 0");
  if (encoder_width % encoder_heads) throw ConfigError("encoder.width must be divisible by encoder.heads");
  if (encoder_width % filter_heads) throw ConfigError("encoder.width must be divisible by filter.heads");
  if (akg_width % akg_heads) throw ConfigError("akg.width must be divisible by akg.heads");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ConfigError("Adam betas must be in [0, 1)");
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must be in [0, 1)");
  eval().validate();
}

pke::PkeConfig RunConfig::pke_config(std::size_t encoder_vocab) const {
  pke::PkeConfig c;
  c.encoder.vocab_size = encoder_vocab;
  c.encoder.width = encoder_width;
  c.encoder.layers = encoder_layers;
  c.encoder.heads = encoder_heads;
  c.encoder.ff_inner = encoder_ff;
  c.encoder.max_len = max_len;
  c.filter_heads = filter_heads;
  c.lstm_hidden = tagger_hidden;
  c.top_k = filter_k;
  c.filter_enabled = filter_enabled;
  c.use_crf = tagger_crf;
  c.one_sided_filter = filter_strict;
  c.dropout = dropout;
  return c;
}

akg::AkgConfig RunConfig::akg_config(std::size_t generator_vocab) const {
  akg::AkgConfig c;
  c.vocab_size = generator_vocab;
  c.width = akg_width;
  c.layers = akg_layers;
  c.heads = akg_heads;
  c.ff_inner = akg_ff;
  c.shared_width = encoder_width;
  c.fusion = fusion_enabled;
  c.dropout = dropout;
  c.beam_depth = beam_depth;
  return c;
}

ad::AdamConfig RunConfig::adam(std::int64_t warmup) const {
  ad::AdamConfig c;
  c.base_lr = lr;
  c.beta1 = beta1;
  c.beta2 = beta2;
  c.epsilon = eps;
  c.clip_norm = clip;
  c.warmup_steps = warmup;
  c.schedule = schedule;
  return c;
}

metrics::EvalConfig RunConfig::eval() const {
  metrics::EvalConfig c;
  c.ks = eval_ks;
  c.recall_k = recall_k;
  c.match.stem = eval_stem;
  c.match.dedup = eval_dedup;
  return c;
}

RunConfig resolve_config(const std::string& profile, const std::string& config_path,
                         const std::map<std::string, std::string>& overrides) {
  RunConfig c = RunConfig::for_profile(profile.empty() ? "desk" : profile);
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot read config file " + config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    // an explicit --profile wins over the file's profile line only if they agree
    RunConfig from_file = c;
    from_file.apply_text(text);
    if (!profile.empty() && from_file.profile != c.profile) {
      throw ConfigError("--profile " + profile + " conflicts with profile=" + from_file.profile + " in " +
                        config_path);
    }
    c = from_file;
  }
  for (const auto& [key, value] : overrides) {
    if (key == "profile") throw ConfigError("set the profile with --profile");
    c.set(key, value);
  }
  c.validate();
  return c;
}

}  // namespace kpj::cli
