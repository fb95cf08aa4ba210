// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "deap/error.hpp"

namespace deap {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double to_real(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v),
          ErrorCode::kConfig, key + ": not a real number: '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::kConfig,
          key + ": not an unsigned integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(ErrorCode::kConfig, key + ": expected true or false, got '" + s + "'");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_uint(key, trim(item)));
  require(!out.empty(), ErrorCode::kConfig, key + ": empty list");
  return out;
}

template <typename C>
std::string fmt_list(const C& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define DEAP_UINT_FIELD(KEY, EXPR)                                        \
  Field {                                                                 \
    KEY, [](const RunConfig& c) { return std::to_string(c.EXPR); },       \
        [](RunConfig& c, const std::string& s) { c.EXPR = to_uint(KEY, s); } \
  }
#define DEAP_REAL_FIELD(KEY, EXPR)                                        \
  Field {                                                                 \
    KEY, [](const RunConfig& c) { return fmt_real(c.EXPR); },             \
        [](RunConfig& c, const std::string& s) { c.EXPR = to_real(KEY, s); } \
  }
#define DEAP_BOOL_FIELD(KEY, EXPR)                                        \
  Field {                                                                 \
    KEY, [](const RunConfig& c) { return std::string(c.EXPR ? "true" : "false"); }, \
        [](RunConfig& c, const std::string& s) { c.EXPR = to_bool(KEY, s); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"model.volume", [](const RunConfig& c) { return fmt_list(c.model.volume); },
            [](RunConfig& c, const std::string& s) {
              auto v = to_list("model.volume", s);
              require(v.size() == 3, ErrorCode::kConfig, "model.volume: expected H,W,D");
              c.model.volume = {v[0], v[1], v[2]};
            }},
      DEAP_UINT_FIELD("model.in_channels", model.in_channels),
      DEAP_UINT_FIELD("model.embed_dim", model.patch.embed_dim),
      DEAP_UINT_FIELD("patch.h", model.patch.patch[0]),
      DEAP_UINT_FIELD("patch.w", model.patch.patch[1]),
      DEAP_UINT_FIELD("patch.d", model.patch.patch[2]),
      Field{"patch.mode", [](const RunConfig& c) { return patch_mode_name(c.model.patch.mode); },
            [](RunConfig& c, const std::string& s) { c.model.patch.mode = parse_patch_mode(s); }},
      DEAP_UINT_FIELD("encoder.layers", model.encoder.layers),
      DEAP_UINT_FIELD("encoder.heads", model.encoder.heads),
      DEAP_UINT_FIELD("encoder.adapter_dim", model.encoder.adapter_dim),
      DEAP_REAL_FIELD("encoder.scale", model.encoder.scale),
      Field{"encoder.taps", [](const RunConfig& c) { return fmt_list(c.model.encoder.taps); },
            [](RunConfig& c, const std::string& s) { c.model.encoder.taps = to_list("encoder.taps", s); }},
      DEAP_UINT_FIELD("encoder.mlp_ratio", model.encoder.mlp_ratio),
      Field{"encoder.mlp_activation",
            [](const RunConfig& c) { return activation_name(c.model.encoder.mlp_activation); },
            [](RunConfig& c, const std::string& s) {
              c.model.encoder.mlp_activation = parse_activation(s);
            }},
      DEAP_BOOL_FIELD("encoder.mlp_residual", model.encoder.mlp_residual),
      Field{"prompter.mode", [](const RunConfig& c) { return prompt_mode_name(c.model.prompter.mode); },
            [](RunConfig& c, const std::string& s) { c.model.prompter.mode = parse_prompt_mode(s); }},
      DEAP_UINT_FIELD("prompter.n", model.prompter.reduced_tokens),
      DEAP_BOOL_FIELD("prompter.share_qk", model.prompter.share_qk),
      DEAP_UINT_FIELD("prompter.layer", model.prompter.prompt_layer),
      DEAP_BOOL_FIELD("prompter.scaling", model.prompter.attn_scaling),
      DEAP_UINT_FIELD("decoder.channels", model.decoder.channels),
      DEAP_BOOL_FIELD("decoder.no_image_branch", model.decoder.no_image_branch),
      DEAP_BOOL_FIELD("decoder.share_image_branch", model.decoder.share_image_branch),
      DEAP_UINT_FIELD("decoder.head_channels", model.decoder.head_channels),
      DEAP_UINT_FIELD("decoder.smooth_channels", model.decoder.smooth_channels),
      DEAP_REAL_FIELD("train.lr", train.optimizer.lr),
      DEAP_REAL_FIELD("train.beta1", train.optimizer.beta1),
      DEAP_REAL_FIELD("train.beta2", train.optimizer.beta2),
      DEAP_REAL_FIELD("train.eps", train.optimizer.eps),
      DEAP_REAL_FIELD("train.weight_decay", train.optimizer.weight_decay),
      DEAP_UINT_FIELD("train.epochs", train.epochs),
      DEAP_UINT_FIELD("train.batch_size", train.batch_size),
      DEAP_UINT_FIELD("train.seed", train.seed),
      Field{"train.precision",
            [](const RunConfig& c) {
              return std::string(c.train.precision == Precision::kFloat32 ? "f32" : "f64");
            },
            [](RunConfig& c, const std::string& s) {
              if (s == "f32") {
                c.train.precision = Precision::kFloat32;
              } else if (s == "f64") {
                c.train.precision = Precision::kFloat64;
              } else {
                fail(ErrorCode::kConfig, "train.precision: expected f32 or f64, got '" + s + "'");
              }
            }},
      DEAP_REAL_FIELD("train.flip_h", train.flip[0]),
      DEAP_REAL_FIELD("train.flip_w", train.flip[1]),
      DEAP_REAL_FIELD("train.flip_d", train.flip[2]),
      DEAP_UINT_FIELD("train.val_every", train.val_every),
      DEAP_REAL_FIELD("loss.w_dice", loss.w_dice),
      DEAP_REAL_FIELD("loss.w_ce", loss.w_ce),
      DEAP_REAL_FIELD("loss.smooth", loss.smooth),
      DEAP_REAL_FIELD("loss.eps", loss.eps),
      DEAP_REAL_FIELD("eval.tau", eval.tau),
      DEAP_REAL_FIELD("eval.threshold", eval.threshold),
  };
  return table;
}

#undef DEAP_UINT_FIELD
#undef DEAP_REAL_FIELD
#undef DEAP_BOOL_FIELD

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, ErrorCode::kConfig,
            "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    require(!key.empty(), ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": empty key");
    require(out.count(key) == 0, ErrorCode::kConfig,
            "config line " + std::to_string(lineno) + ": duplicate key " + key);
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_config(RunConfig& cfg, const ConfigMap& values) {
  for (const auto& [key, value] : values) {
    bool known = false;
    for (const auto& f : fields()) {
      if (key == f.key) {
        try {
          f.set(cfg, value);
        } catch (const Error& e) {
          // Enum parsers don't know which key they serve.
          const std::string msg = e.what();
          if (msg.find(key) == std::string::npos) fail(e.code(), key + ": " + msg);
          throw;
        }
        known = true;
        break;
      }
    }
    require(known, ErrorCode::kConfig, "unknown config key: " + key);
  }
}

std::string echo_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

void validate_run_config(const RunConfig& cfg) {
  validate_model_config(cfg.model);
  validate_adamw_config(cfg.train.optimizer);
  validate_loss_config(cfg.loss);
  require(cfg.train.epochs >= 1, ErrorCode::kConfig, "train.epochs must be >= 1");
  require(cfg.train.batch_size >= 1, ErrorCode::kConfig, "train.batch_size must be >= 1");
  for (double p : cfg.train.flip) {
    require(p >= 0.0 && p <= 1.0, ErrorCode::kConfig, "flip probabilities must be in [0, 1]");
  }
  require(cfg.eval.tau >= 0.0, ErrorCode::kConfig, "eval.tau must be >= 0");
  require(cfg.eval.threshold > 0.0 && cfg.eval.threshold < 1.0, ErrorCode::kConfig,
          "eval.threshold must be in (0, 1)");
}

}  // namespace deap
