// SPDX-License-Identifier: Apache-2.0
#include "nrfe/run_config.hpp"

#include "nrfe/error.hpp"
#include "nrfe/llm_gateway.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace nrfe {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw InvalidArgument(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw InvalidArgument(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw InvalidArgument(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw InvalidArgument(key + ": expected true or false, got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define NRFE_DOUBLE(name, member)                                              \
  Field {                                                                      \
    name, [](const RunConfig& c) { return fmt_double(c.member); },             \
        [](RunConfig& c, const std::string& v) { c.member = parse_double(name, v); } \
  }
#define NRFE_INT(name, member)                                                              \
  Field {                                                                                   \
    name, [](const RunConfig& c) { return std::to_string(c.member); },                      \
        [](RunConfig& c, const std::string& v) { c.member = static_cast<int>(parse_int(name, v)); } \
  }
#define NRFE_U64(name, member)                                              \
  Field {                                                                   \
    name, [](const RunConfig& c) { return std::to_string(c.member); },      \
        [](RunConfig& c, const std::string& v) { c.member = parse_u64(name, v); } \
  }
#define NRFE_BOOL(name, member)                                              \
  Field {                                                                    \
    name, [](const RunConfig& c) { return fmt_bool(c.member); },             \
        [](RunConfig& c, const std::string& v) { c.member = parse_bool(name, v); } \
  }
#define NRFE_STRING(name, member)                                  \
  Field {                                                          \
    name, [](const RunConfig& c) { return c.member; },             \
        [](RunConfig& c, const std::string& v) { c.member = v; }   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      NRFE_U64("seed", seed),
      NRFE_U64("split_seed", split_seed),
      NRFE_DOUBLE("train_fraction", train_fraction),
      NRFE_DOUBLE("learning_rate", learning_rate),
      NRFE_DOUBLE("clip_norm", clip_norm),
      NRFE_DOUBLE("dropout", dropout),
      NRFE_INT("stage1_epochs", stage1_epochs),
      NRFE_INT("stage2_epochs", stage2_epochs),
      NRFE_INT("student_epochs", student_epochs),
      NRFE_INT("batch_size", batch_size),
      NRFE_DOUBLE("margin", margin),
      NRFE_BOOL("raw_cosine", raw_cosine),
      NRFE_INT("cross_heads", cross_heads),
      NRFE_INT("classifier_hidden", classifier_hidden),
      NRFE_BOOL("joint_stage2", joint_stage2),
      NRFE_DOUBLE("joint_lambda", joint_lambda),
      NRFE_DOUBLE("temperature", temperature),
      NRFE_DOUBLE("w_dis", w_dis),
      NRFE_DOUBLE("w_cls", w_cls),
      NRFE_BOOL("batch_averaged_target", batch_averaged_target),
      NRFE_BOOL("freeze_inherited", freeze_inherited),
      Field{"encoder.variant",
            [](const RunConfig& c) { return std::string(to_string(c.encoder.variant)); },
            [](RunConfig& c, const std::string& v) { c.encoder.variant = parse_encoder_variant(v); }},
      NRFE_INT("encoder.depth", encoder.depth),
      NRFE_INT("encoder.width", encoder.width),
      NRFE_INT("encoder.heads", encoder.heads),
      NRFE_INT("encoder.ff_width", encoder.ff_width),
      NRFE_INT("encoder.max_len", encoder.max_len),
      NRFE_INT("min_count", min_count),
      NRFE_INT("sr3.m", sr3.polarity_threshold),
      NRFE_INT("sr3.i", sr3.confidence_increment),
      NRFE_INT("sr3.max_iter", sr3.max_iter),
      NRFE_INT("sr3.parse_retries", sr3.parse_retries),
      NRFE_INT("sr3.workers", sr3.workers),
      NRFE_BOOL("sr3.strict_conjunction", sr3.strict_conjunction),
      NRFE_STRING("llm.endpoint", llm_endpoint),
      NRFE_STRING("llm.model", llm_model),
      Field{"dataset", [](const RunConfig& c) { return std::string(to_string(c.dataset)); },
            [](RunConfig& c, const std::string& v) { c.dataset = parse_dataset(v); }},
      NRFE_STRING("corpus", corpus),
      NRFE_STRING("store", store),
      Field{"label_scheme",
            [](const RunConfig& c) {
              return c.label_scheme ? std::string(to_string(*c.label_scheme)) : "default";
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "default") {
                c.label_scheme.reset();
              } else {
                c.label_scheme = parse_label_scheme(v);
              }
            }},
      Field{"ablation", [](const RunConfig& c) { return std::string(to_string(c.ablation)); },
            [](RunConfig& c, const std::string& v) { c.ablation = parse_ablation(v); }},
      NRFE_BOOL("synthetic", synthetic),
      NRFE_INT("synthetic_n", synthetic_n),
      NRFE_U64("synthetic_seed", synthetic_seed),
  };
  return table;
}

#undef NRFE_DOUBLE
#undef NRFE_INT
#undef NRFE_U64
#undef NRFE_BOOL
#undef NRFE_STRING

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw InvalidArgument("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, value);
}

std::string get_setting(const RunConfig& cfg, const std::string& key) {
  return field(key).get(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError("expected 'key = value'", number);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      apply_setting(base, key, value);
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what(), number);
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

TeacherConfig teacher_config(const RunConfig& cfg) {
  TeacherConfig t;
  t.news_encoder = cfg.encoder;
  t.reasoning_encoder = cfg.encoder;
  t.cross_heads = cfg.cross_heads;
  t.raw_cosine = cfg.raw_cosine;
  t.margin = cfg.margin;
  t.classifier_hidden = cfg.classifier_hidden;
  t.dropout = cfg.dropout;
  t.ablation = cfg.ablation;
  return t;
}

TeacherTrainConfig teacher_train_config(const RunConfig& cfg) {
  TeacherTrainConfig t;
  t.stage1_epochs = cfg.stage1_epochs;
  t.stage2_epochs = cfg.stage2_epochs;
  t.batch_size = cfg.batch_size;
  t.adam.learning_rate = cfg.learning_rate;
  t.adam.clip_norm = cfg.clip_norm;
  t.seed = cfg.seed;
  t.joint_stage2 = cfg.joint_stage2;
  t.joint_lambda = cfg.joint_lambda;
  return t;
}

StudentTrainConfig student_train_config(const RunConfig& cfg) {
  StudentTrainConfig s;
  s.epochs = cfg.student_epochs;
  s.batch_size = cfg.batch_size;
  s.adam.learning_rate = cfg.learning_rate;
  s.adam.clip_norm = cfg.clip_norm;
  s.seed = cfg.seed + 1;
  s.weights = {cfg.w_dis, cfg.w_cls};
  s.batch_averaged_target = cfg.batch_averaged_target;
  s.freeze_inherited = cfg.freeze_inherited;
  return s;
}

void write_manifest(const std::filesystem::path& path, const RunConfig& cfg,
                    const ManifestInfo& info) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# nrfe run manifest; replay with: nrfe run --config " << path.filename().string()
      << "\n";
  out << "# prompt templates: " << llm::kTemplateVersion << "\n";
  out << "# assumption: stage1_epochs, stage2_epochs and student_epochs each count one phase\n";
  if (!info.corpus_hash.empty()) out << "# corpus_hash: " << info.corpus_hash << "\n";
  if (!info.store_hash.empty()) out << "# store_hash: " << info.store_hash << "\n";
  out << config_text(cfg);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace nrfe
