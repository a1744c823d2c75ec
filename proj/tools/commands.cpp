// Copyright 2026 The maskscribe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "commands.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "maskscribe/decoder.h"
#include "maskscribe/error.h"
#include "maskscribe/eval.h"
#include "maskscribe/nn/grad_check.h"
#include "maskscribe/synthdata.h"
#include "maskscribe/training.h"
#include "run_config.h"

namespace maskscribe::cli {
namespace {

namespace fs = std::filesystem;

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
};

std::string require(const RunConfig& cfg, const std::string& key, const std::string& why) {
  auto v = cfg.str(key);
  if (v.empty()) throw UsageError(flag_name(key) + " is required " + why);
  return v;
}

std::vector<synth::Sample> load_split(const RunConfig& cfg, const std::string& split) {
  const fs::path path = fs::path(cfg.str("data")) / (split + ".tsv");
  if (!fs::exists(path)) throw IoError("missing " + split + " split: " + path.string());
  return synth::read_split(path);
}

synth::ChannelParams channel_from(const RunConfig& cfg) {
  synth::ChannelParams ch;
  ch.noise = cfg.real("noise");
  std::tie(ch.jitter_min, ch.jitter_max) = cfg.range("jitter");
  ch.frame_rate = cfg.real("frame_rate");
  synth::validate(ch);
  return ch;
}

DenoiserConfig denoiser_from(const RunConfig& cfg) {
  DenoiserConfig c;
  c.canvas_length = cfg.size("canvas_length");
  c.width = cfg.size("width");
  c.heads = cfg.size("heads");
  c.ff_width = cfg.size("ff_width");
  c.blocks = cfg.size("blocks");
  c.cond_window = cfg.size("cond_window");
  c.cond_blocks = cfg.size("cond_blocks");
  c.max_cond_length = cfg.size("max_cond_length");
  c.validate();
  return c;
}

LengthPredictorConfig predictor_from(const RunConfig& cfg) {
  LengthPredictorConfig c;
  c.max_length = cfg.size("max_length");
  c.width = cfg.size("lp_width");
  c.heads = cfg.size("lp_heads");
  c.ff_width = cfg.size("lp_ff_width");
  c.layers = cfg.size("lp_layers");
  c.window = cfg.size("lp_window");
  c.dropout = cfg.real("lp_dropout");
  c.max_cond_length = cfg.size("max_cond_length");
  c.validate();
  return c;
}

DecodeConfig decode_from(const RunConfig& cfg) {
  DecodeConfig d;
  d.threshold = cfg.real("threshold");
  d.block_size = cfg.size("block_size");
  d.radius = cfg.size("radius");
  d.lambda = cfg.real("lambda");
  d.beta = cfg.real("beta");
  d.validate();
  return d;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Writes to the file named by `key`, or to `fallback` when it is empty.
class Sink {
 public:
  Sink(const RunConfig& cfg, const std::string& key, std::ostream& fallback) {
    const auto path = cfg.str(key);
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw IoError("cannot write " + path);
    stream_ = file_.get();
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

int cmd_gen_data(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const fs::path out = require(cfg, "out", "(dataset directory)");
  synth::DatasetSizes sizes{cfg.size("train_size"), cfg.size("val_size"), cfg.size("test_size")};
  const auto ds = synth::generate_dataset(sizes, synth::Grammar::standard(), channel_from(cfg),
                                          cfg.size("canvas_length"), cfg.u64("seed"));
  synth::write_dataset(ds, out);
  ctx.out << "wrote " << ds.train.size() << "/" << ds.val.size() << "/" << ds.test.size()
          << " samples to " << out.string() << "\n";
  return 0;
}

int cmd_train(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const fs::path out = require(cfg, "out", "(checkpoint path)");
  const fs::path curve_path = cfg.str("curve").empty() ? fs::path(out.string() + ".loss.csv")
                                                       : fs::path(cfg.str("curve"));
  auto progress = [&](const LossPoint& p) {
    if (p.step % 100 == 0) {
      ctx.out << "step " << p.step << " lr " << p.lr << " loss " << fixed(p.loss, 4) << "\n";
    }
  };

  if (cfg.flag("length_predictor")) {
    const auto train = load_split(cfg, "train");
    const auto val = load_split(cfg, "val");
    LengthTrainConfig tc;
    tc.steps = cfg.size("lp_steps");
    tc.lr = cfg.real("lp_lr");
    tc.batch_size = cfg.size("batch_size");
    tc.seed = cfg.u64("seed");
    tc.clip_norm = cfg.real("clip_norm");
    tc.weight_decay = cfg.real("weight_decay");
    LengthPredictor<float> model(predictor_from(cfg), cfg.u64("seed"));
    const auto result = train_length_predictor(model, train, val, tc, progress);
    model.save(out);
    write_loss_csv(result.curve, curve_path);
    const auto& v = result.validation;
    ctx.out << "validation Acc@0 " << fixed(v.acc[0], 2) << " Acc@1 " << fixed(v.acc[1], 2)
            << " Acc@3 " << fixed(v.acc[2], 2) << " Acc@5 " << fixed(v.acc[3], 2) << " MAE "
            << fixed(v.mae, 4) << "\n";
    ctx.out << "saved " << out.string() << "\n";
    return 0;
  }

  const auto stage = int(cfg.size("stage"));
  if (stage != 1 && stage != 2) throw UsageError("--stage must be 1 or 2");
  TrainConfig tc = TrainConfig::for_stage(stage);
  if (cfg.size("steps") > 0) tc.steps = cfg.size("steps");
  if (cfg.real("lr") > 0) tc.lr = cfg.real("lr");
  tc.batch_size = cfg.size("batch_size");
  tc.seed = cfg.u64("seed");
  tc.clip_norm = cfg.real("clip_norm");
  tc.weight_decay = cfg.real("weight_decay");

  std::optional<Denoiser<float>> model;
  if (stage == 2) {
    const auto init = cfg.str("init");
    if (init.empty()) {
      throw UsageError(
          "stage 2 continues from a stage-1 model: pass --init <stage-1 checkpoint>");
    }
    model.emplace(Denoiser<float>::load(init));
    if (model->trained_stage() < 1) {
      throw UsageError("--init " + init + " has not finished stage 1");
    }
  } else {
    model.emplace(denoiser_from(cfg), cfg.u64("seed"));
  }
  const auto train = load_split(cfg, "train");
  const auto curve = train_stage(*model, train, tc, progress);
  model->save(out);
  write_loss_csv(curve, curve_path);
  ctx.out << "final loss " << fixed(curve.back().loss, 4) << "\nsaved " << out.string() << "\n";
  return 0;
}

std::vector<synth::Sample> decode_samples(const RunConfig& cfg) {
  const auto split = cfg.str("split");
  if (split != "train" && split != "val" && split != "test") {
    throw UsageError("--split must be train, val or test");
  }
  auto samples = load_split(cfg, split);
  const std::size_t limit = cfg.size("limit");
  if (limit > 0 && limit < samples.size()) samples.resize(limit);
  return samples;
}

enum class Mode { kImplicit, kOracle, kLengthGuided };

Mode mode_from(const RunConfig& cfg) {
  const auto m = cfg.str("mode");
  if (m == "implicit") return Mode::kImplicit;
  if (m == "oracle") return Mode::kOracle;
  if (m == "length-guided") return Mode::kLengthGuided;
  throw UsageError("--mode must be implicit, oracle or length-guided");
}

std::optional<LengthPredictor<float>> length_model_for(const RunConfig& cfg, Mode mode) {
  if (mode != Mode::kLengthGuided) return std::nullopt;
  const auto path = cfg.str("length_checkpoint");
  if (path.empty()) throw UsageError("length-guided decoding needs --length-checkpoint");
  return LengthPredictor<float>::load(path);
}

int cmd_decode(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Mode mode = mode_from(cfg);
  const auto length_model = length_model_for(cfg, mode);
  const auto model = Denoiser<float>::load(require(cfg, "checkpoint", "(denoiser checkpoint)"));
  const auto samples = decode_samples(cfg);
  const DecodeConfig dc = decode_from(cfg);
  const std::size_t t = model.config().canvas_length;

  struct Output {
    CandidateResult best;
    std::vector<DecodeTrace> traces;
  };
  std::vector<Output> outputs(samples.size());
  eval::parallel_for(samples.size(), cfg.size("threads"), [&](std::size_t i) {
    const auto& s = samples[i];
    Output& o = outputs[i];
    if (mode == Mode::kLengthGuided) {
      auto r = decode_length_guided(model, *length_model, s.clip.frames, dc);
      for (const auto& c : r.candidates) o.traces.push_back(c.trace);
      o.best = r.best();
    } else if (mode == Mode::kOracle) {
      o.best = decode_pinned(denoiser_probs(model, s.clip.frames), t, s.length(), dc);
      o.best.score = std::nan("");
      o.traces.push_back(o.best.trace);
    } else {
      o.best = decode_implicit(denoiser_probs(model, s.clip.frames), t, dc);
      o.best.score = std::nan("");
      o.traces.push_back(o.best.trace);
    }
  });

  Sink sink(cfg, "out", ctx.out);
  std::vector<eval::WordEdits> edits;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& b = outputs[i].best;
    *sink << samples[i].id << '\t' << synth::detokenize(b.transcript) << '\t'
          << b.transcript.size() << '\t' << b.iterations << '\t'
          << (std::isnan(b.score) ? std::string("-") : fixed(b.score, 6)) << '\n';
    edits.push_back(eval::wer(samples[i].text, synth::detokenize(b.transcript)));
  }
  if (!cfg.str("trace").empty()) {
    std::ofstream trace(cfg.str("trace"));
    if (!trace) throw IoError("cannot write " + cfg.str("trace"));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      trace << "# " << samples[i].id << '\n';
      for (const auto& tr : outputs[i].traces) write_trace(trace, tr);
    }
  }
  ctx.err << "decoded " << samples.size() << " samples, WER " << fixed(eval::corpus_wer(edits), 2)
          << "%\n";
  return 0;
}

int cmd_eval(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto test = decode_samples(cfg);
  std::optional<Denoiser<float>> stage1, stage2;
  std::optional<LengthPredictor<float>> length;
  if (!cfg.str("stage1").empty()) stage1.emplace(Denoiser<float>::load(cfg.str("stage1")));
  if (!cfg.str("stage2").empty()) stage2.emplace(Denoiser<float>::load(cfg.str("stage2")));
  if (!cfg.str("length_checkpoint").empty()) {
    length.emplace(LengthPredictor<float>::load(cfg.str("length_checkpoint")));
  }
  if (!stage1 && !stage2) throw UsageError("eval needs --stage1 and/or --stage2");

  eval::ScenarioConfig sc;
  sc.decode = decode_from(cfg);
  sc.lambda_only = cfg.real("lambda_only") < 0 ? sc.decode.lambda : cfg.real("lambda_only");
  sc.threads = cfg.size("threads");
  sc.log = &ctx.err;
  auto reports = eval::run_scenarios(
      {stage1 ? &*stage1 : nullptr, stage2 ? &*stage2 : nullptr, length ? &*length : nullptr},
      test, sc);

  const std::size_t rtf_n = cfg.size("rtf_samples");
  if (rtf_n > 0 && stage2) {
    std::vector<synth::Sample> timed(test.begin(), test.begin() + std::min(rtf_n, test.size()));
    const std::size_t t = stage2->config().canvas_length;
    for (auto& r : reports) {
      std::function<void(const synth::Sample&)> fn;
      if (r.scenario == "stage2_implicit") {
        fn = [&](const synth::Sample& s) {
          decode_implicit(denoiser_probs(*stage2, s.clip.frames), t, sc.decode);
        };
      } else if (r.scenario == "stage2_rerank_lambda_beta" && length) {
        fn = [&](const synth::Sample& s) {
          decode_length_guided(*stage2, *length, s.clip.frames, sc.decode);
        };
      }
      if (fn) r.rtf = eval::measure_rtf(fn, timed, 5, cfg.real("frame_rate")).rtf;
    }
  }

  const fs::path train_path = fs::path(cfg.str("data")) / "train.tsv";
  if (fs::exists(train_path)) {
    eval::VisemeBaseline baseline(synth::read_split(train_path));
    reports.push_back(baseline.evaluate(test));
  }
  Sink sink(cfg, "out", ctx.out);
  eval::write_reports_csv(*sink, reports);
  return 0;
}

int cmd_gridsearch(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto model = Denoiser<float>::load(require(cfg, "checkpoint", "(stage-2 checkpoint)"));
  const auto length = LengthPredictor<float>::load(
      require(cfg, "length_checkpoint", "(length predictor checkpoint)"));
  auto val = load_split(cfg, "val");
  const std::size_t limit = cfg.size("limit");
  if (limit > 0 && limit < val.size()) val.resize(limit);
  const auto cache =
      eval::decode_candidate_cache(model, length, val, decode_from(cfg), cfg.size("threads"));
  const auto grid = eval::grid_search_rerank(cache, val);
  Sink sink(cfg, "out", ctx.out);
  eval::write_grid_csv(*sink, grid);
  ctx.err << "selected lambda " << fixed(grid.best_lambda, 1) << " beta "
          << fixed(grid.best_beta, 1) << " (validation WER " << fixed(grid.best_wer, 2)
          << "%)\n";
  return 0;
}

int cmd_trace(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Mode mode = mode_from(cfg);
  const auto length_model = length_model_for(cfg, mode);
  const auto model = Denoiser<float>::load(require(cfg, "checkpoint", "(denoiser checkpoint)"));
  const auto samples = load_split(cfg, cfg.str("split"));
  const std::size_t index = cfg.size("sample");
  if (index >= samples.size()) {
    throw UsageError("--sample " + std::to_string(index) + " is past the end of the split");
  }
  const auto& s = samples[index];
  const DecodeConfig dc = decode_from(cfg);
  const std::size_t t = model.config().canvas_length;
  Sink sink(cfg, "out", ctx.out);
  const std::string block = "block " + std::to_string(dc.block_size);
  if (mode == Mode::kLengthGuided) {
    const auto r = decode_length_guided(model, *length_model, s.clip.frames, dc);
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
      const auto& c = r.candidates[i];
      eval::emit_trace(*sink, s, c.trace,
                       block + ", score " + fixed(c.score, 4) + (i == r.chosen ? ", chosen" : ""));
    }
  } else if (mode == Mode::kOracle) {
    const auto r = decode_pinned(denoiser_probs(model, s.clip.frames), t, s.length(), dc);
    eval::emit_trace(*sink, s, r.trace, "oracle, " + block);
  } else {
    const auto r = decode_implicit(denoiser_probs(model, s.clip.frames), t, dc);
    eval::emit_trace(*sink, s, r.trace, "implicit, " + block);
    *sink << "hypothesis: " << synth::detokenize(r.transcript) << (r.no_eos ? "  [no EOS]" : "")
          << "\n";
  }
  return 0;
}

int cmd_grad_check(Context& ctx) {
  DenoiserConfig c;
  c.canvas_length = 8;
  c.vocab_size = 12;
  c.width = 16;
  c.heads = 2;
  c.ff_width = 32;
  c.blocks = 2;
  c.max_cond_length = 8;
  Denoiser<double> model(c, ctx.cfg.u64("seed"));
  Rng rng(derive_seed(ctx.cfg.u64("seed"), "grad-check"));
  for (auto& e : model.params().entries()) {
    for (auto& v : e.tensor.mutable_data()) v += rng.normal(0.0, 0.2);
  }
  std::vector<int> canvas(8), targets(8), frames(7);
  std::vector<double> weights(8);
  for (auto& v : canvas) v = int(rng.uniform_int(0, 11));
  for (auto& v : targets) v = int(rng.uniform_int(0, 11));
  for (auto& v : frames) v = int(rng.uniform_int(0, 11));
  for (auto& w : weights) w = rng.uniform();
  const auto report = nn::grad_check(
      [&] { return nn::cross_entropy(model.forward(canvas, frames), targets, weights); },
      model.params());
  for (const auto& e : report.entries) {
    ctx.out << e.name << " elements " << e.elements_checked << " rel " << e.rel_error << "\n";
  }
  ctx.out << "max relative error " << report.max_rel_error << " (tolerance " << report.tolerance
          << "): " << (report.passed ? "PASS" : "FAIL") << "\n";
  return report.passed ? 0 : 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"maskscribe: masked-denoising transcription of viseme streams"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  using Handler = std::function<int(Context&)>;
  struct Command {
    const char* name;
    const char* help;
    Handler handler;
  };
  const std::vector<Command> commands = {
      {"gen-data", "generate the synthetic train/val/test splits", cmd_gen_data},
      {"train", "train a denoiser stage or the length predictor", cmd_train},
      {"decode", "decode a split and write one hypothesis per sample", cmd_decode},
      {"eval", "run the scenario suite and write a CSV report", cmd_eval},
      {"gridsearch", "tune the rerank weights on the validation split", cmd_gridsearch},
      {"trace", "show a step-by-step decode of one sample", cmd_trace},
      {"grad-check", "check denoiser gradients against finite differences", cmd_grad_check},
  };

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::map<std::string, bool> flags;
  std::string config_path;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key = value configuration file");
    for (const auto& entry : key_specs()) {
      const std::string key = entry.key;
      const std::string help = std::string(entry.help) + " [" + entry.default_value + "]";
      CLI::Option* opt = entry.is_flag ? sub->add_flag(flag_name(key), flags[key], help)
                                      : sub->add_option(flag_name(key), values[key], help);
      options[std::string(c.name) + "/" + key] = opt;
    }
    subs.emplace_back(sub, &c);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  for (const auto& [sub, command] : subs) {
    if (!sub->parsed()) continue;
    try {
      Context ctx{RunConfig{}, out, err};
      if (!config_path.empty()) ctx.cfg.load_file(config_path);
      for (const auto& entry : key_specs()) {
        const std::string key = entry.key;
        if (options[std::string(command->name) + "/" + key]->count() == 0) continue;
        ctx.cfg.set(key, entry.is_flag ? (flags[key] ? "true" : "false") : values[key], "flag");
      }
      out << "# command " << command->name << "\n";
      ctx.cfg.echo(out);
      out.flush();
      return command->handler(ctx);
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << "\n";
      return 1;
    } catch (const ConfigError& e) {
      err << "configuration error: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}

}  // namespace maskscribe::cli
