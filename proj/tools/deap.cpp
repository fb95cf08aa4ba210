// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// deap: synth | train | eval | flops | gradcheck

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deap/config.hpp"
#include "deap/cost.hpp"
#include "deap/error.hpp"
#include "deap/gradcheck_suite.hpp"
#include "deap/parallel.hpp"
#include "deap/trainer.hpp"

namespace {

using namespace deap;

std::vector<std::size_t> parse_csv_sizes(const std::string& s, std::size_t want, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == item.size() && !item.empty() && v > 0, ErrorCode::kConfig,
            std::string(what) + ": expected positive integers, got '" + s + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  require(out.size() == want, ErrorCode::kConfig,
          std::string(what) + ": expected " + std::to_string(want) + " comma-separated values");
  return out;
}

void print_config(const RunConfig& cfg) {
  std::cout << "# resolved config\n" << echo_config(cfg) << std::flush;
}

RunConfig load_config(const std::string& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!file.empty()) apply_config(cfg, read_config_file(file));
  std::string text;
  for (const auto& kv : overrides) text += kv + "\n";
  apply_config(cfg, parse_config_text(text));
  return cfg;
}

void print_line(const std::string& s) { std::cout << s << std::endl; }

// ---- synth

struct SynthArgs {
  std::string out;
  std::size_t cases = 10;
  std::uint64_t seed = 0;
  std::string dims = "32,32,32";
  std::size_t lesions = 1;
  double noise = 0.02;
};

int run_synth(const SynthArgs& a) {
  const auto d = parse_csv_sizes(a.dims, 3, "--dims");
  std::cout << "# resolved config\n"
            << "synth.cases = " << a.cases << "\nsynth.seed = " << a.seed << "\nsynth.dims = "
            << a.dims << "\nsynth.lesions = " << a.lesions << "\nsynth.noise = " << a.noise
            << "\nsynth.out = " << a.out << "\n";
  require(a.cases > 0, ErrorCode::kInvalidArgument, "--cases must be > 0");
  const auto cases = synthesize_cases(a.cases, a.seed, {d[0], d[1], d[2]}, a.lesions, a.noise);
  write_dataset(cases, a.out);
  std::size_t fg = 0;
  for (const auto& c : cases) fg += c.mask.foreground();
  std::cout << "wrote " << cases.size() << " cases to " << a.out << " (mean foreground "
            << fg / cases.size() << " voxels)\n";
  return 0;
}

// ---- train

struct TrainArgs {
  std::string data, out, config, resume;
  std::vector<std::string> overrides;
  double val_fraction = 0.2;
};

template <typename T>
int train_impl(const RunConfig& cfg, const TrainArgs& a, std::vector<Case> train,
               std::vector<Case> val) {
  Trainer<T> trainer(cfg, std::move(train), std::move(val));
  trainer.set_logger(print_line);
  if (!a.resume.empty()) {
    trainer.resume(load_checkpoint(a.resume));
    std::cout << "resumed at epoch " << trainer.epochs_done() << ", step " << trainer.steps_done()
              << "\n";
  }
  const auto result = trainer.run(a.out);
  if (result.aborted) {
    std::cerr << "error: " << result.abort_reason << "\n";
    return 1;
  }
  std::cout << "done: " << trainer.steps_done() << " steps; checkpoints in " << a.out << "\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  RunConfig cfg = load_config(a.config, a.overrides);
  validate_run_config(cfg);
  print_config(cfg);
  require(a.val_fraction >= 0.0 && a.val_fraction < 1.0, ErrorCode::kInvalidArgument,
          "--val-fraction must be in [0, 1)");
  const auto cases = read_dataset(a.data);
  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.id);
  const auto split = split_dataset(ids, {1.0 - a.val_fraction, a.val_fraction, 0.0}, cfg.train.seed);
  std::cout << "# split: " << split.train.size() << " train, " << split.val.size() << " val\n";
  std::filesystem::create_directories(a.out);
  std::ofstream(std::filesystem::path(a.out) / "config.txt") << echo_config(cfg);
  auto train = select_cases(cases, split.train);
  auto val = select_cases(cases, split.val);
  return cfg.train.precision == Precision::kFloat32
             ? train_impl<float>(cfg, a, std::move(train), std::move(val))
             : train_impl<double>(cfg, a, std::move(train), std::move(val));
}

// ---- eval

struct EvalArgs {
  std::string data, checkpoint, csv, cases;
  double tau = -1.0, threshold = -1.0;
};

template <typename T>
int eval_impl(const RunConfig& cfg, const Checkpoint& ckpt, const std::vector<Case>& cases,
              const EvalArgs& a) {
  Trainer<T> trainer(cfg, cases);
  trainer.resume(ckpt);
  const auto metrics = trainer.evaluate(cases);
  std::ofstream csv;
  if (!a.csv.empty()) {
    csv.open(a.csv);
    require(csv.good(), ErrorCode::kIo, "cannot write " + a.csv);
    csv << "case_id,dice,nsd,tau\n";
  }
  char buf[256];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%.6f\t%g", m.id.c_str(), m.report.dice,
                  m.report.nsd, m.report.tau);
    std::cout << buf << "\n";
    if (csv.is_open()) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%g", m.id.c_str(), m.report.dice,
                    m.report.nsd, m.report.tau);
      csv << buf << "\n";
    }
  }
  const auto mean = mean_report(metrics, cfg.eval.tau);
  std::snprintf(buf, sizeof(buf), "# mean dice %.6f nsd %.6f over %zu cases", mean.dice, mean.nsd,
                metrics.size());
  std::cout << buf << std::endl;
  return 0;
}

int run_eval(const EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  RunConfig cfg;
  apply_config(cfg, parse_config_text(ckpt.config));
  if (a.tau >= 0.0) cfg.eval.tau = a.tau;
  if (a.threshold >= 0.0) cfg.eval.threshold = a.threshold;
  validate_run_config(cfg);
  print_config(cfg);
  auto cases = read_dataset(a.data);
  if (!a.cases.empty()) {
    std::vector<std::string> ids;
    std::stringstream ss(a.cases);
    std::string id;
    while (std::getline(ss, id, ',')) ids.push_back(id);
    cases = select_cases(cases, ids);
  }
  return cfg.train.precision == Precision::kFloat32 ? eval_impl<float>(cfg, ckpt, cases, a)
                                                    : eval_impl<double>(cfg, ckpt, cases, a);
}

// ---- flops

struct FlopsArgs {
  std::string config, feature_shape, prompter = "dual-shared";
  std::vector<std::string> overrides;
  std::size_t n = 0;
  bool mac = false;
};

std::string giga(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f G", v / 1e9);
  return buf;
}

std::string mega(std::size_t v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f M (%zu)", static_cast<double>(v) / 1e6, v);
  return buf;
}

int run_flops(const FlopsArgs& a) {
  RunConfig cfg = load_config(a.config, a.overrides);
  print_config(cfg);
  const double fpm = a.mac ? 1.0 : 2.0;
  std::cout << "# convention: 1 MAC = " << fpm << " FLOP" << (fpm == 1.0 ? "" : "s")
            << "; 'layers' counts weighted layers, 'all-ops' adds attention products\n";
  if (!a.feature_shape.empty()) {
    const auto s = parse_csv_sizes(a.feature_shape, 4, "--feature-shape");
    const Index3 grid{s[0], s[1], s[2]};
    const std::size_t c = s[3];
    const std::size_t n = a.n ? a.n : cfg.model.prompter.reduced_tokens;
    const auto selected = parse_prompter_variant(a.prompter);
    validate_prompter_config(cfg.model.prompter, c, grid[0] * grid[1] * grid[2]);
    std::cout << "feature shape " << a.feature_shape << ", n = " << n << "\n";
    for (auto v : {PrompterVariant::kSpatialOnly, PrompterVariant::kDualShared,
                   PrompterVariant::kDualFull}) {
      const auto r = count_prompter_cost(grid, c, n, v, fpm);
      std::cout << (v == selected ? "* " : "  ") << prompter_variant_name(v) << "\tflops "
                << giga(r.flops(CostScope::kLayers)) << "\tall-ops " << giga(r.flops(CostScope::kAllOps))
                << "\tparams " << mega(r.params()) << "\n";
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "shared-vs-full reduction: %.2f%% (layers), %.2f%% (all-ops)",
                  100.0 * sharing_reduction(grid, c, n, CostScope::kLayers),
                  100.0 * sharing_reduction(grid, c, n, CostScope::kAllOps));
    std::cout << buf << "\n";
    return 0;
  }
  const auto r = count_cost(cfg.model, fpm);
  for (const auto& m : r.modules()) {
    std::cout << m << "\tflops " << giga(r.module_flops(m)) << "\tall-ops "
              << giga(r.module_flops(m, CostScope::kAllOps)) << "\tparams "
              << mega(r.module_params(m)) << "\n";
  }
  std::cout << "total\tflops " << giga(r.flops()) << "\tall-ops " << giga(r.flops(CostScope::kAllOps))
            << "\tparams " << mega(r.params()) << "\n";
  return 0;
}

// ---- gradcheck

int run_gradcheck(const SuiteOptions& o) {
  std::cout << "# resolved config\ngradcheck.instances = " << o.instances
            << "\ngradcheck.tolerance = " << o.tolerance << "\ngradcheck.seed = " << o.seed << "\n";
  std::size_t failed = 0;
  const auto results = run_gradcheck_suite(o, [&](const SuiteResult& r) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%s %-22s %zu/%zu worst %.3e kinks %zu", r.ok() ? "ok  " : "FAIL",
                  r.name.c_str(), r.passed, r.instances, r.worst, r.kinks);
    std::cout << buf << std::endl;
    if (!r.ok()) ++failed;
  });
  std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deap: volumetric segmentation with adapters and a dual attention prompter"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Kernel threads (default: DEAP_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic phantom dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--cases", synth.cases, "Number of cases");
  s->add_option("--seed", synth.seed, "Dataset seed");
  s->add_option("--dims", synth.dims, "Volume size H,W,D");
  s->add_option("--lesions", synth.lesions, "Lesions per case");
  s->add_option("--noise", synth.noise, "Gaussian noise sd");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train on a dataset directory");
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--out", train.out, "Run directory for checkpoints")->required();
  t->add_option("--config", train.config, "key = value config file");
  t->add_option("--set", train.overrides, "Override one key, e.g. --set train.epochs=10");
  t->add_option("--val-fraction", train.val_fraction, "Share of cases held out for validation");
  t->add_option("--resume", train.resume, "Continue from a checkpoint");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  e->add_option("--data", eval.data, "Dataset directory")->required();
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--cases", eval.cases, "Comma-separated case ids (default: all)");
  e->add_option("--tau", eval.tau, "NSD tolerance in voxels (default: from checkpoint)");
  e->add_option("--threshold", eval.threshold, "Mask threshold (default: from checkpoint)");
  e->add_option("--emit-csv", eval.csv, "Also write the report as CSV");

  FlopsArgs flops;
  auto* f = app.add_subcommand("flops", "Analytic FLOP and parameter counts");
  f->add_option("--config", flops.config, "key = value config file");
  f->add_option("--set", flops.overrides, "Override one key");
  f->add_option("--feature-shape", flops.feature_shape, "Prompter-only analysis at H,W,D,C");
  f->add_option("--prompter", flops.prompter, "spatial-only | dual-shared | dual-full");
  f->add_option("--n", flops.n, "Reduced token count (default: prompter.n)");
  f->add_flag("--mac", flops.mac, "Count a multiply-accumulate as one FLOP");

  SuiteOptions grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every op and block");
  g->add_option("--instances", grad.instances, "Random instances per check")->check(CLI::PositiveNumber);
  g->add_option("--tol", grad.tolerance, "Relative tolerance");
  g->add_option("--seed", grad.seed, "Instance seed");
  g->add_option("--only", grad.only, "Run only these checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    if (*s) return run_synth(synth);
    if (*t) return run_train(train);
    if (*e) return run_eval(eval);
    if (*f) return run_flops(flops);
    if (*g) return run_gradcheck(grad);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
