// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/cost.hpp"

#include <algorithm>
#include <cstdio>

#include "deap/error.hpp"

namespace deap {

double CostReport::flops(CostScope scope) const {
  double macs = 0.0;
  for (const auto& t : terms) {
    if (t.kind == CostKind::kLayer || (scope == CostScope::kAllOps && t.kind == CostKind::kAttention)) {
      macs += t.macs;
    }
  }
  return macs * flops_per_mac;
}

double CostReport::module_flops(const std::string& module, CostScope scope) const {
  CostReport sub;
  sub.flops_per_mac = flops_per_mac;
  for (const auto& t : terms) {
    if (t.module == module) sub.terms.push_back(t);
  }
  return sub.flops(scope);
}

std::size_t CostReport::params() const {
  std::size_t n = 0;
  for (const auto& t : terms) n += t.params;
  return n;
}

std::size_t CostReport::module_params(const std::string& module) const {
  std::size_t n = 0;
  for (const auto& t : terms) {
    if (t.module == module) n += t.params;
  }
  return n;
}

std::vector<std::string> CostReport::modules() const {
  std::vector<std::string> out;
  for (const auto& t : terms) {
    if (std::find(out.begin(), out.end(), t.module) == out.end()) out.push_back(t.module);
  }
  return out;
}

std::string prompter_variant_name(PrompterVariant v) {
  switch (v) {
    case PrompterVariant::kSpatialOnly:
      return "spatial-only";
    case PrompterVariant::kDualShared:
      return "dual-shared";
    case PrompterVariant::kDualFull:
      return "dual-full";
  }
  return "?";
}

PrompterVariant parse_prompter_variant(const std::string& name) {
  if (name == "spatial-only") return PrompterVariant::kSpatialOnly;
  if (name == "dual-shared") return PrompterVariant::kDualShared;
  if (name == "dual-full") return PrompterVariant::kDualFull;
  fail(ErrorCode::kConfig,
       "unknown prompter variant '" + name + "' (expected spatial-only, dual-shared or dual-full)");
}

namespace {

struct Builder {
  CostReport report;
  std::string module;

  void layer(const std::string& name, double macs, std::size_t params) {
    report.terms.push_back({module, name, CostKind::kLayer, macs, params});
  }
  void attention(const std::string& name, double macs) {
    report.terms.push_back({module, name, CostKind::kAttention, macs, 0});
  }
  void other(const std::string& name, std::size_t params) {
    report.terms.push_back({module, name, CostKind::kOther, 0.0, params});
  }
  // Dense [M, cin] x [cin, cout] map.
  void linear(const std::string& name, double m, std::size_t cin, std::size_t cout, bool bias) {
    layer(name, m * cin * cout, cin * cout + (bias ? cout : 0));
  }
  void conv(const std::string& name, double out_voxels, std::size_t k3, std::size_t cin,
            std::size_t cout, bool bias) {
    layer(name, out_voxels * k3 * cin * cout, k3 * cin * cout + (bias ? cout : 0));
  }
};

void add_prompter_terms(Builder& b, double m, std::size_t c, std::size_t n,
                        PrompterVariant variant) {
  const double dc = static_cast<double>(c), dn = static_cast<double>(n);
  b.linear("wq", m, c, c, false);
  b.linear("wk", m, c, c, false);
  b.linear("wv_sa", m, c, c, false);
  b.layer("reduce_k", dn * m * dc, n * static_cast<std::size_t>(m));
  b.layer("reduce_v", dn * m * dc, n * static_cast<std::size_t>(m));
  b.other("norm_q_sa", 2 * c);
  b.attention("spatial scores", m * dn * dc);
  b.attention("spatial mixing", m * dn * dc);
  if (variant == PrompterVariant::kSpatialOnly) {
    b.linear("out_sa", m, c, c, false);
    return;
  }
  if (variant == PrompterVariant::kDualFull) {
    b.linear("wq_ca", m, c, c, false);
    b.linear("wk_ca", m, c, c, false);
  }
  b.linear("wv_ca", m, c, c, false);
  b.other("norm_q_ca", 2 * c);
  b.other("norm_k_ca", 2 * c);
  b.attention("channel affinity", m * dc * dc);
  b.attention("channel mixing", m * dc * dc);
  b.linear("down_sa", m, c, c / 2, false);
  b.linear("down_ca", m, c, c / 2, false);
}

}  // namespace

CostReport count_prompter_cost(const Index3& grid, std::size_t channels, std::size_t n,
                               PrompterVariant variant, double flops_per_mac) {
  Builder b;
  b.report.flops_per_mac = flops_per_mac;
  b.module = "prompter";
  add_prompter_terms(b, static_cast<double>(grid[0] * grid[1] * grid[2]), channels, n, variant);
  return b.report;
}

double sharing_reduction(const Index3& grid, std::size_t channels, std::size_t n,
                         CostScope scope) {
  const double full = count_prompter_cost(grid, channels, n, PrompterVariant::kDualFull).flops(scope);
  const double shared =
      count_prompter_cost(grid, channels, n, PrompterVariant::kDualShared).flops(scope);
  return (full - shared) / full;
}

CostReport count_cost(const ModelConfig& cfg, double flops_per_mac) {
  const Index3 grid = validate_model_config(cfg);
  Builder b;
  b.report.flops_per_mac = flops_per_mac;
  const std::size_t c = cfg.patch.embed_dim, nin = cfg.in_channels;
  const double m = static_cast<double>(grid[0] * grid[1] * grid[2]);
  const auto [ph, pw, pd] = cfg.patch.patch;

  b.module = "patch_embed";
  if (cfg.patch.mode == PatchMode::kPseudo3d) {
    b.conv("in-plane", static_cast<double>(grid[0] * grid[1] * cfg.volume[2]), ph * pw, nin, c, true);
    b.layer("depth", m * pd * c, pd * c + c);
  } else {
    b.conv("3d", m, ph * pw * pd, nin, c, true);
  }
  b.other("pos_embed", static_cast<std::size_t>(m) * c);

  b.module = "encoder";
  const std::size_t hidden = cfg.encoder.mlp_ratio * c, l = cfg.encoder.adapter_dim;
  for (std::size_t i = 1; i <= cfg.encoder.layers; ++i) {
    char tag[16];
    std::snprintf(tag, sizeof(tag), "layer%02zu.", i);
    const std::string p = tag;
    b.other(p + "norm1", 2 * c);
    b.linear(p + "attn.q", m, c, c, true);
    b.linear(p + "attn.k", m, c, c, true);
    b.linear(p + "attn.v", m, c, c, true);
    b.linear(p + "attn.o", m, c, c, true);
    b.attention(p + "attn.scores", m * m * c);
    b.attention(p + "attn.mixing", m * m * c);
    b.other(p + "norm2", 2 * c);
    b.linear(p + "mlp.fc1", m, c, hidden, true);
    b.linear(p + "mlp.fc2", m, hidden, c, true);
    b.linear(p + "adapter.down", m, c, l, false);
    b.linear(p + "adapter.up", m, l, c, false);
  }

  b.module = "prompter";
  if (cfg.prompter.mode != PromptMode::kNone) {
    PrompterVariant v = PrompterVariant::kSpatialOnly;
    if (cfg.prompter.mode == PromptMode::kDual) {
      v = cfg.prompter.share_qk ? PrompterVariant::kDualShared : PrompterVariant::kDualFull;
    }
    add_prompter_terms(b, m, c, cfg.prompter.reduced_tokens, v);
  }

  b.module = "decoder";
  const std::size_t w = decoder_width(cfg.decoder, c);
  const std::size_t taps = cfg.encoder.taps.size();
  const Index3 up{2 * grid[0], 2 * grid[1], 2 * grid[2]};
  const double up_vox = static_cast<double>(up[0] * up[1] * up[2]);
  const double full_vox = static_cast<double>(cfg.volume[0] * cfg.volume[1] * cfg.volume[2]);
  if (!cfg.decoder.no_image_branch) {
    const auto strides = image_branch_strides(cfg.volume, grid);
    const std::size_t branches = cfg.decoder.share_image_branch ? 1 : taps;
    for (std::size_t br = 0; br < branches; ++br) {
      const std::string p = "image" + std::to_string(br + 1) + ".";
      Index3 dims = cfg.volume;
      std::size_t cin = nin;
      for (std::size_t k = 0; k < strides.size(); ++k) {
        for (int a = 0; a < 3; ++a) dims[a] = (dims[a] + 2 - 3) / strides[k][a] + 1;
        b.conv(p + "down" + std::to_string(k + 1), double(dims[0] * dims[1] * dims[2]), 27, cin, w,
               false);
        cin = w;
      }
      b.conv(p + "block.1", up_vox, 27, cin, w, false);
      b.conv(p + "block.2", up_vox, 27, w, w, false);
    }
  }
  for (std::size_t j = 0; j < taps; ++j) {
    const std::string p = "enh" + std::to_string(j + 1) + ".fuse.";
    b.conv(p + "1", up_vox, 27, c + w, w, false);
    b.conv(p + "2", up_vox, 27, w, w, false);
  }
  const std::size_t head = cfg.decoder.head_channels, smooth = cfg.decoder.smooth_channels;
  b.conv("predict.head.1", up_vox, 27, taps * w, head, false);
  b.conv("predict.head.2", up_vox, 27, head, head, false);
  b.conv("predict.smooth", full_vox, 27, head, smooth, true);
  b.conv("predict.proj", full_vox, 1, smooth, 1, true);
  return b.report;
}

}  // namespace deap
