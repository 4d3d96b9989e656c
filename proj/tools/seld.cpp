// tools/seld.cpp

// Copyright 2026  The einv2-seld authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// seld: synth | featurize | train | eval | infer | gradcheck | sweep
//
// The dataset root defaults to $SELD_DATA_ROOT (else "data"); a config file
// or --data overrides it. Failures exit with status 1 and one line on stderr.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seld/gradient_suite.hpp"
#include "seld/trainer/train.hpp"

namespace fs = std::filesystem;
using namespace seld;
using trainer::RunConfig;

namespace {

struct Common {
  std::string config;
  std::string data;
  std::vector<std::string> overrides;
  long long seed = -1;
};

void add_common(CLI::App* app, Common& c, bool with_seed = true) {
  app->add_option("-c,--config", c.config, "run config file (YAML)");
  app->add_option("--data", c.data, "dataset root (overrides config and $SELD_DATA_ROOT)");
  app->add_option("--set", c.overrides, "override one key, section.key=value (repeatable)");
  if (with_seed) app->add_option("--seed", c.seed, "seed (dataset seed for synth, training seed otherwise)");
}

RunConfig base_config() {
  RunConfig base;
  if (const char* env = std::getenv("SELD_DATA_ROOT"); env && *env) base.dataset.root = env;
  return base;
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? base_config() : trainer::load_run_config(c.config, base_config());
  for (const auto& o : c.overrides) trainer::apply_override(cfg, o);
  if (!c.data.empty()) cfg.dataset.root = c.data;
  return cfg;
}

void apply_eval_flags(RunConfig& cfg, const std::string& format, bool oracle_sed, bool oracle_doa) {
  if (!format.empty()) cfg.model.output_format = model::parse_output_format(format);
  if (oracle_sed) cfg.eval.oracle_sed = true;
  if (oracle_doa) cfg.eval.oracle_doa = true;
}

// ------------------------------------------------------- prediction CSVs

std::vector<std::pair<std::string, fs::path>> csv_files(const fs::path& p) {
  std::vector<std::pair<std::string, fs::path>> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ".csv") out.emplace_back(e.path().stem().string(), e.path());
    std::sort(out.begin(), out.end());
  } else {
    if (!fs::exists(p)) throw MissingFileError("no such file " + p.string());
    out.emplace_back(p.stem().string(), p);
  }
  return out;
}

metrics::SeldScores score_csvs(const fs::path& pred, const fs::path& ref, const trainer::EvalSection& ev) {
  const auto refs = csv_files(ref);
  const auto preds = csv_files(pred);
  std::map<std::string, fs::path> pmap(preds.begin(), preds.end());
  if (refs.empty()) throw MissingFileError("no reference CSV files under " + ref.string());
  metrics::ScoreAccumulator acc(ev.threshold, ev.segment_frames);
  for (const auto& [id, rpath] : refs) {
    const auto rrows = data::read_label_csv(rpath.string());
    std::vector<data::LabelRow> prows;
    if (auto it = pmap.find(id); it != pmap.end()) prows = data::read_label_csv(it->second.string());
    else if (refs.size() == 1 && preds.size() == 1) prows = data::read_label_csv(preds[0].second.string());
    else throw MissingFileError("no prediction CSV for clip " + id);
    int frames = 0;
    for (const auto& r : rrows) frames = std::max(frames, r.frame + 1);
    for (const auto& r : prows) frames = std::max(frames, r.frame + 1);
    acc.add(data::events_from_rows(prows, frames), data::events_from_rows(rrows, frames));
  }
  return acc.finish();
}

void print_scores(const metrics::SeldScores& s) {
  std::cout << metrics::format_scores(s) << "\n";
  std::printf("  TP %ld  FP %ld  FN %ld  S %ld  D %ld  I %ld  N %ld  matched %ld\n", s.tp, s.fp, s.fn,
              s.substitutions, s.deletions, s.insertions, s.n_ref, s.matched);
  std::fflush(stdout);
}

std::string error_class(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config error";
  if (dynamic_cast<const MissingFileError*>(&e)) return "missing file";
  if (dynamic_cast<const DimensionError*>(&e)) return "shape mismatch";
  if (dynamic_cast<const FormatError*>(&e)) return "format error";
  if (dynamic_cast<const ContractError*>(&e)) return "contract violation";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EINV2 sound event localization and detection"};
  app.require_subcommand(1);

  // synth
  Common synth_c;
  std::string synth_out;
  int synth_train = -1, synth_test = -1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic FOA dataset");
  add_common(synth, synth_c);
  synth->add_option("-o,--out", synth_out, "output dataset root (default: dataset.root)");
  synth->add_option("--train-clips", synth_train, "train clips (default: dataset.train_clips)");
  synth->add_option("--test-clips", synth_test, "test clips (default: dataset.test_clips)");

  // featurize
  Common feat_c;
  auto* feat = app.add_subcommand("featurize", "build the feature cache and normalization statistics");
  add_common(feat, feat_c, false);

  // train
  Common train_c;
  std::string train_out, train_format;
  bool train_osed = false, train_odoa = false, train_resume = false;
  auto* train = app.add_subcommand("train", "train n_trials models and write run directories");
  add_common(train, train_c);
  train->add_option("-o,--out", train_out, "run directory (default: train.out_dir)");
  train->add_option("--format", train_format, "output format: trackwise | seldnet");
  train->add_flag("--oracle-sed", train_osed, "score with reference SED (DoA-only evaluation)");
  train->add_flag("--oracle-doa", train_odoa, "score with reference DoA (SED-only evaluation)");
  train->add_flag("--resume", train_resume, "continue from ckpt_last when present");

  // eval
  Common eval_c;
  std::string eval_ckpt, eval_split, eval_pred, eval_ref, eval_report, eval_format, eval_pred_out;
  bool eval_osed = false, eval_odoa = false;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a split, or prediction CSVs against references");
  add_common(eval, eval_c, false);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file (ckpt_best / ckpt_last)");
  eval->add_option("--split", eval_split, "split to score (default: dataset.test_split)");
  eval->add_option("--pred", eval_pred, "prediction CSV file or directory");
  eval->add_option("--ref", eval_ref, "reference CSV file or directory");
  eval->add_option("--report", eval_report, "write a metrics report file");
  eval->add_option("--write-predictions", eval_pred_out, "directory for per-segment prediction CSVs");
  eval->add_option("--format", eval_format, "output format: trackwise | seldnet");
  eval->add_flag("--oracle-sed", eval_osed, "score with reference SED (DoA-only evaluation)");
  eval->add_flag("--oracle-doa", eval_odoa, "score with reference DoA (SED-only evaluation)");

  // infer
  std::string infer_ckpt, infer_wav, infer_out;
  double infer_threshold = -1;
  auto* infer = app.add_subcommand("infer", "predict events for one FOA WAV file");
  infer->add_option("--checkpoint", infer_ckpt, "checkpoint file")->required();
  infer->add_option("--wav", infer_wav, "4-channel 24 kHz WAV file")->required();
  infer->add_option("-o,--out", infer_out, "prediction CSV (default: standard output)");
  infer->add_option("--sed-threshold", infer_threshold, "SED probability threshold (default: eval.sed_threshold)");

  // gradcheck
  std::size_t gc_trials = 3, gc_coords = 400;
  std::uint64_t gc_seed = 2024;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gc->add_option("--trials", gc_trials, "random instances per op");
  gc->add_option("--coords", gc_coords, "parameter coordinates per model check");
  gc->add_option("--seed", gc_seed, "suite seed");

  // sweep
  Common sweep_c;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "ps_mode x format ablation from one config");
  add_common(sweep, sweep_c);
  sweep->add_option("-o,--out", sweep_out, "sweep directory (default: train.out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      RunConfig cfg = resolve(synth_c);
      if (synth_c.seed >= 0) cfg.dataset.scene.seed = static_cast<std::uint64_t>(synth_c.seed);
      const std::string root = synth_out.empty() ? cfg.dataset.root : synth_out;
      data::DatasetSpec spec;
      spec.scene = cfg.dataset.scene;
      spec.splits = {{cfg.dataset.train_split, synth_train >= 0 ? synth_train : cfg.dataset.train_clips},
                     {cfg.dataset.test_split, synth_test >= 0 ? synth_test : cfg.dataset.test_clips}};
      const auto rep = data::synth_dataset(data::DatasetLayout(root), spec);
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
      std::printf("wrote %d clips, %d events (%d rejected of %d drawn) to %s\n", rep.clips, rep.events,
                  rep.rejected, rep.attempts, root.c_str());
    } else if (*feat) {
      const RunConfig cfg = resolve(feat_c);
      const data::DatasetLayout layout(cfg.dataset.root);
      int n_train = 0, n_test = 0;
      const auto tr = trainer::load_bank(layout, cfg.dataset.train_split, cfg.features, 0, &n_train);
      const auto te = trainer::load_bank(layout, cfg.dataset.test_split, cfg.features, 0, &n_test);
      trainer::compute_stats(layout, tr, cfg.features);
      std::printf("%s: %zu segments (%d featurized)\n%s: %zu segments (%d featurized)\nstatistics: %s\n",
                  cfg.dataset.train_split.c_str(), tr.size(), n_train, cfg.dataset.test_split.c_str(), te.size(),
                  n_test, layout.stats().string().c_str());
    } else if (*train) {
      RunConfig cfg = resolve(train_c);
      if (train_c.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(train_c.seed);
      if (!train_out.empty()) cfg.train.out_dir = train_out;
      apply_eval_flags(cfg, train_format, train_osed, train_odoa);
      cfg.validate();
      const auto data = trainer::prepare_data(cfg);
      const auto r = trainer::run_trials(cfg, data, cfg.train.out_dir, &std::cout, train_resume);
      std::cout << "\nlast epoch: ER " << trainer::format_mean_std(r.last.er, 3) << ", F "
                << trainer::format_mean_std(r.last.f, 3) << ", LE " << trainer::format_mean_std(r.last.le, 1)
                << ", LR " << trainer::format_mean_std(r.last.lr, 3) << "\nbest ER:    ER "
                << trainer::format_mean_std(r.best.er, 3) << ", F " << trainer::format_mean_std(r.best.f, 3)
                << ", LE " << trainer::format_mean_std(r.best.le, 1) << ", LR "
                << trainer::format_mean_std(r.best.lr, 3) << "\nrun directory: " << cfg.train.out_dir << "\n";
    } else if (*eval) {
      metrics::SeldScores s;
      RunConfig cfg;
      if (!eval_pred.empty() || !eval_ref.empty()) {
        if (eval_pred.empty() || eval_ref.empty()) throw ConfigError("--pred and --ref go together");
        if (!eval_ckpt.empty()) throw ConfigError("give either --checkpoint or --pred/--ref");
        cfg = resolve(eval_c);
        s = score_csvs(eval_pred, eval_ref, cfg.eval);
      } else {
        if (eval_ckpt.empty()) throw ConfigError("eval needs --checkpoint or --pred/--ref");
        if (eval_c.config.empty()) {
          cfg = trainer::checkpoint_config(diff::Checkpoint::load(eval_ckpt));
          for (const auto& o : eval_c.overrides) trainer::apply_override(cfg, o);
          if (!eval_c.data.empty()) cfg.dataset.root = eval_c.data;
        } else {
          cfg = resolve(eval_c);
        }
        apply_eval_flags(cfg, eval_format, eval_osed, eval_odoa);
        cfg.validate();
        const std::string split = eval_split.empty() ? cfg.dataset.test_split : eval_split;
        std::vector<data::FrameEvents> preds;
        s = trainer::evaluate_checkpoint(eval_ckpt, cfg, split, eval_pred_out.empty() ? nullptr : &preds);
        if (!eval_pred_out.empty()) {
          fs::create_directories(eval_pred_out);
          const data::DatasetLayout layout(cfg.dataset.root);
          std::size_t i = 0;
          for (const auto& id : layout.clips(split)) {
            const auto segs = data::segment_clips(data::load_clip(layout, split, id));
            for (std::size_t k = 0; k < segs.size() && i < preds.size(); ++k, ++i) {
              std::string name = segs[k].id;
              std::replace(name.begin(), name.end(), '#', '-');
              data::write_label_csv((fs::path(eval_pred_out) / (name + ".csv")).string(),
                                    data::rows_from_events(preds[i]));
            }
          }
        }
      }
      print_scores(s);
      if (!eval_report.empty()) metrics::write_report(eval_report, s, cfg.eval.threshold, cfg.eval.segment_frames);
    } else if (*infer) {
      const auto ckpt = diff::Checkpoint::load(infer_ckpt);
      RunConfig cfg = trainer::checkpoint_config(ckpt);
      if (infer_threshold >= 0) cfg.eval.sed_threshold = infer_threshold;
      trainer::Trainer tr(cfg, trainer::checkpoint_stats(ckpt), 0);
      tr.restore(ckpt);
      const auto clip = data::load_clip_files(infer_wav, {});
      const auto rows = data::rows_from_events(trainer::infer_clip(tr, clip));
      if (infer_out.empty()) {
        data::write_label_csv(std::cout, rows);
      } else {
        data::write_label_csv(infer_out, rows);
        std::printf("wrote %zu prediction rows to %s\n", rows.size(), infer_out.c_str());
      }
    } else if (*gc) {
      const auto rows = gradient_suite(gc_trials, gc_coords, gc_seed);
      bool ok = true;
      std::printf("%-28s %12s %8s %8s  %s\n", "op", "max_rel_err", "coords", "retries", "status");
      for (const auto& r : rows) {
        const bool pass = r.max_rel_error < kGradTolerance;
        ok &= pass;
        std::printf("%-28s %12.3e %8zu %8zu  %s\n", r.name.c_str(), r.max_rel_error, r.coords, r.kink_retries,
                    pass ? "ok" : "FAIL");
      }
      if (!ok) {
        std::cerr << "gradcheck: at least one op exceeds " << kGradTolerance << "\n";
        return 1;
      }
    } else if (*sweep) {
      RunConfig cfg = resolve(sweep_c);
      if (sweep_c.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(sweep_c.seed);
      const fs::path dir = sweep_out.empty() ? fs::path(cfg.train.out_dir) : fs::path(sweep_out);
      const auto rows = trainer::run_sweep(cfg, dir, &std::cout);
      std::cout << "\n" << trainer::sweep_table(rows) << "\nreport: " << (dir / "sweep_report").string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "seld: " << error_class(e) << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
