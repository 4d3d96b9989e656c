// seld/trainer/train.hpp

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

// Training loop, evaluation and run directories.
//
// A run directory holds
//   config.used      the frozen run config
//   history.csv      epoch,loss,ER,F,LE,LR per evaluated epoch
//   ckpt_best        parameters at the lowest test ER seen
//   ckpt_last        full run state after the last epoch (resumable)
//   trials_summary   mean and population std over trials
// With n_trials > 1 each trial gets its own trial<i>/ subdirectory and the
// summary sits at the top.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "seld/assignment.hpp"
#include "seld/diffcore/checkpoint.hpp"
#include "seld/losses/pit.hpp"
#include "seld/losses/seldnet.hpp"
#include "seld/metrics/report.hpp"
#include "seld/metrics/scores.hpp"
#include "seld/model/decode.hpp"
#include "seld/model/einv2.hpp"
#include "seld/trainer/batch.hpp"
#include "seld/trainer/config.hpp"
#include "seld/trainer/optim.hpp"

namespace seld::trainer {

namespace fs = std::filesystem;
using Real = float;

// ------------------------------------------------------------ loss/decoding

template <class T>
diff::Tensor<T> batch_loss(const RunConfig& cfg, const model::ModelOutput<T>& out,
                           const std::vector<data::FrameEvents>& labels, std::size_t frames) {
  const auto& m = cfg.model;
  const auto K = static_cast<std::size_t>(m.n_classes);
  if (m.output_format == model::OutputFormat::trackwise)
    return losses::pit_loss(cfg.loss.kind, out.sed, out.doa,
                            losses::track_targets(labels, frames, static_cast<std::size_t>(m.n_tracks), K),
                            cfg.loss.beta);
  return losses::seldnet_loss(out.sed, out.doa, losses::class_targets(labels, frames, K), cfg.loss.beta);
}

namespace detail {

inline void copy_direction(data::Event& dst, const data::Event& src) {
  dst.azimuth = src.azimuth;
  dst.elevation = src.elevation;
  dst.degenerate = src.degenerate;
}

inline data::Event event_from_vector(int cls, int track, const Real* v) {
  data::Event e;
  e.cls = cls;
  e.track = track;
  model::set_direction(e, v[0], v[1], v[2]);
  return e;
}

}  // namespace detail

/// Decodes item `b` of a batch output. With oracle_sed the reference events
/// are emitted with predicted directions: trackwise outputs assign tracks to
/// references by minimum total angular distance, SELDnet outputs read the
/// direction of the reference class. With oracle_doa every decoded event
/// takes the direction of the nearest same-class reference of its frame.
inline data::FrameEvents decode_item(const model::ModelConfig& m, const EvalSection& ev,
                                     const model::ModelOutput<Real>& out, std::size_t b,
                                     const data::FrameEvents* ref) {
  const std::size_t To = out.sed.dim(1), K = static_cast<std::size_t>(m.n_classes);
  const bool trackwise = m.output_format == model::OutputFormat::trackwise;
  const std::size_t M = trackwise ? static_cast<std::size_t>(m.n_tracks) : 1;
  const std::size_t sed_item = To * (trackwise ? M * K : K), doa_item = To * (trackwise ? M : K) * 3;
  const auto sed = out.sed.data().subspan(b * sed_item, sed_item);
  const auto doa = out.doa.data().subspan(b * doa_item, doa_item);

  if ((ev.oracle_sed || ev.oracle_doa) && (!ref || ref->size() != To))
    throw DimensionError("oracle evaluation needs references with " + std::to_string(To) + " frames");

  if (ev.oracle_sed) {
    data::FrameEvents res(To);
    for (std::size_t t = 0; t < To; ++t) {
      const auto& refs = (*ref)[t];
      if (refs.empty()) continue;
      if (!trackwise) {
        for (const auto& r : refs)
          res[t].push_back(detail::event_from_vector(r.cls, r.track,
                                                     doa.data() + (t * K + r.cls) * 3));
        continue;
      }
      std::vector<double> cost(refs.size() * M);
      for (std::size_t i = 0; i < refs.size(); ++i)
        for (std::size_t j = 0; j < M; ++j) {
          const Real* v = doa.data() + (t * M + j) * 3;
          cost[i * M + j] = metrics::angular_distance(refs[i].direction(), {v[0], v[1], v[2]});
        }
      const auto col = hungarian(cost, refs.size(), M);
      for (std::size_t i = 0; i < refs.size(); ++i)
        if (col[i] >= 0)
          res[t].push_back(detail::event_from_vector(refs[i].cls, col[i],
                                                     doa.data() + (t * M + col[i]) * 3));
    }
    return res;
  }

  data::FrameEvents res =
      trackwise ? model::decode_trackwise<Real>(sed, doa, To, M, K, ev.sed_threshold)
                : model::decode_seldnet_format<Real>(sed, doa, To, K, ev.sed_threshold);
  if (ev.oracle_doa)
    for (std::size_t t = 0; t < To; ++t)
      for (auto& e : res[t]) {
        const data::Event* best = nullptr;
        double best_d = 0;
        for (const auto& r : (*ref)[t]) {
          if (r.cls != e.cls) continue;
          const double d = metrics::angular_distance(e.direction(), r.direction());
          if (!best || d < best_d) {
            best = &r;
            best_d = d;
          }
        }
        if (best) detail::copy_direction(e, *best);
      }
  return res;
}

// ------------------------------------------------------------------ trainer

struct StepInfo {
  double loss = 0;
  double grad_norm = 0;
  bool applied = true;
};

struct EpochInfo {
  double mean_loss = 0;
  long steps = 0;
};

class Trainer {
 public:
  Trainer(const RunConfig& cfg, const features::FeatureStats& stats, std::uint64_t seed)
      : cfg_(cfg),
        stats_(stats),
        seed_(seed),
        model_(cfg.model, mix_seed(seed, 1)),
        opt_(cfg.train.adamw),
        rng_(mix_seed(seed, 2)) {
    cfg_.validate();
  }

  const RunConfig& config() const { return cfg_; }
  model::Einv2<Real>& model() { return model_; }
  const model::Einv2<Real>& model() const { return model_; }
  AdamW<Real>& optimizer() { return opt_; }
  std::mt19937_64& rng() { return rng_; }
  const features::FeatureStats& stats() const { return stats_; }
  int epoch() const { return epoch_; }
  long step() const { return step_; }
  const std::vector<metrics::HistoryRow>& history() const { return history_; }
  double best_er() const { return best_er_; }
  int best_epoch() const { return best_epoch_; }

  AugmentOptions augment() const { return {cfg_.train.rotate, cfg_.train.spec_augment, cfg_.train.masks}; }

  /// One optimizer step on `batch`.
  StepInfo train_step(const Batch<Real>& batch, double lr) {
    auto& store = model_.parameters();
    store.zero_grad();
    diff::Tape<Real> tape;
    diff::Tensor<Real> loss;
    {
      diff::TapeScope<Real> scope(tape);
      const auto out = model_.forward(batch.sed_in, batch.doa_in, diff::Mode::train);
      loss = batch_loss(cfg_, out, batch.labels, batch.frames);
      tape.backward(loss);
    }
    StepInfo s;
    s.loss = static_cast<double>(loss.item());
    clip_grad_norm(store, cfg_.train.clip_norm);
    const auto r = opt_.step(store, std::isfinite(s.loss) ? lr : 0.0);
    s.grad_norm = r.grad_norm;
    s.applied = r.applied;
    ++step_;
    return s;
  }

  /// Shuffles `train` and runs one epoch at the scheduled learning rate,
  /// stopping early once train.max_steps steps have been taken overall.
  EpochInfo train_epoch(const SegmentBank& train) {
    if (train.empty()) throw ConfigError("training split '" + train.split + "' has no segments");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    const double lr = cfg_.train.schedule()(epoch_);
    const auto B = static_cast<std::size_t>(cfg_.train.batch_size);
    EpochInfo info;
    double sum = 0;
    for (std::size_t i = 0; i < order.size() && !out_of_steps(); i += B) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(i),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + B)));
      const auto batch = make_batch<Real>(train, idx, stats_, augment(), rng_);
      const auto s = train_step(batch, lr);
      if (std::isfinite(s.loss)) sum += s.loss;
      ++info.steps;
    }
    info.mean_loss = info.steps > 0 ? sum / static_cast<double>(info.steps) : 0.0;
    ++epoch_;
    return info;
  }

  bool out_of_steps() const { return cfg_.train.max_steps > 0 && step_ >= cfg_.train.max_steps; }

  /// Eval-mode predictions for every segment of `bank`, in bank order.
  std::vector<data::FrameEvents> predict(const SegmentBank& bank) const {
    return predict(bank, cfg_.eval);
  }

  std::vector<data::FrameEvents> predict(const SegmentBank& bank, const EvalSection& ev) const {
    std::vector<data::FrameEvents> out;
    diff::NoGradScope<Real> no_grad;
    const auto B = static_cast<std::size_t>(cfg_.train.batch_size);
    std::mt19937_64 unused(0);
    for (std::size_t i = 0; i < bank.size(); i += B) {
      std::vector<std::size_t> idx;
      for (std::size_t j = i; j < std::min(bank.size(), i + B); ++j) idx.push_back(j);
      const auto batch = make_batch<Real>(bank, idx, stats_, AugmentOptions{}, unused);
      const auto y = model_.forward(batch.sed_in, batch.doa_in, diff::Mode::eval);
      for (std::size_t b = 0; b < idx.size(); ++b)
        out.push_back(decode_item(cfg_.model, ev, y, b, &batch.labels[b]));
    }
    return out;
  }

  metrics::SeldScores evaluate(const SegmentBank& bank) const { return evaluate(bank, cfg_.eval); }

  metrics::SeldScores evaluate(const SegmentBank& bank, const EvalSection& ev) const {
    if (bank.empty()) throw ConfigError("evaluation split '" + bank.split + "' has no segments");
    const auto preds = predict(bank, ev);
    metrics::ScoreAccumulator acc(ev.threshold, ev.segment_frames);
    for (std::size_t i = 0; i < bank.size(); ++i)
      acc.add(preds[i], data::events_from_rows(bank.segments[i].labels, bank.segments[i].n_frames));
    return acc.finish();
  }

  /// Records one history row and tracks the best ER; returns true when
  /// this row is a new best.
  bool record(double loss, const metrics::SeldScores& s) {
    history_.push_back({epoch_, loss, s});
    if (best_epoch_ < 0 || s.er < best_er_) {
      best_er_ = s.er;
      best_epoch_ = epoch_;
      best_scores_ = s;
      return true;
    }
    return false;
  }
  const metrics::SeldScores& best_scores() const { return best_scores_; }

  /// Parameters plus everything needed to score or resume.
  diff::Checkpoint checkpoint(bool with_state) const;
  void save(const fs::path& path, bool with_state) const { checkpoint(with_state).save(path.string()); }
  /// Restores parameters and, when present, optimizer/RNG/epoch/history.
  void restore(const diff::Checkpoint& ckpt);

 private:
  RunConfig cfg_;
  features::FeatureStats stats_;
  std::uint64_t seed_;
  model::Einv2<Real> model_;
  AdamW<Real> opt_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  long step_ = 0;
  std::vector<metrics::HistoryRow> history_;
  double best_er_ = 0;
  int best_epoch_ = -1;
  metrics::SeldScores best_scores_;
};

// ---------------------------------------------------------- checkpoint I/O

namespace detail {

inline std::string escape_meta(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '\\') o += "\\\\";
    else if (c == '\n') o += "\\n";
    else o += c;
  }
  return o;
}

inline std::string unescape_meta(const std::string& s) {
  std::string o;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      o += s[i + 1] == 'n' ? '\n' : s[i + 1];
      ++i;
    } else {
      o += s[i];
    }
  }
  return o;
}

inline const std::string& meta_at(const diff::Checkpoint& c, const std::string& k) {
  auto it = c.meta.find(k);
  if (it == c.meta.end()) throw FormatError("checkpoint lacks '" + k + "'");
  return it->second;
}

// history rows as [n, 6 + 3] doubles: epoch, loss, ER, F, LE, LR, matched, n_ref, distance_sum
inline constexpr std::size_t kHistoryCols = 9;

}  // namespace detail

inline diff::Checkpoint Trainer::checkpoint(bool with_state) const {
  diff::Checkpoint c;
  c.config_hash = cfg_.model.hash();
  c.meta["run_config"] = detail::escape_meta(serialize(cfg_));
  c.meta["feature_hash"] = std::to_string(cfg_.features.hash());
  c.meta["seed"] = std::to_string(seed_);
  c.meta["epoch"] = std::to_string(epoch_);
  c.meta["step"] = std::to_string(step_);
  diff::save_parameters(c, model_.parameters());
  c.put<double>("stats.mean", {stats_.mean.size()}, stats_.mean);
  c.put<double>("stats.std", {stats_.stddev.size()}, stats_.stddev);
  if (!with_state) return c;
  c.meta["state"] = "1";
  std::ostringstream rs;
  rs << rng_;
  c.meta["rng"] = rs.str();
  c.meta["best_epoch"] = std::to_string(best_epoch_);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", best_er_);
  c.meta["best_er"] = buf;
  opt_.save(c);
  std::vector<double> h;
  for (const auto& r : history_) {
    const auto& s = r.scores;
    h.insert(h.end(), {static_cast<double>(r.epoch), r.loss, s.er, s.f, s.le, s.lr,
                       static_cast<double>(s.matched), static_cast<double>(s.n_ref), s.distance_sum});
  }
  c.put<double>("history", {history_.size(), detail::kHistoryCols}, h);
  return c;
}

inline void Trainer::restore(const diff::Checkpoint& c) {
  if (c.config_hash != cfg_.model.hash())
    throw ConfigError("checkpoint was written for another model config (hash mismatch)");
  diff::load_parameters(c, model_.parameters());
  stats_.mean = c.get<double>("stats.mean");
  stats_.stddev = c.get<double>("stats.std");
  epoch_ = std::stoi(detail::meta_at(c, "epoch"));
  step_ = std::stol(detail::meta_at(c, "step"));
  if (!c.meta.count("state")) return;
  std::istringstream rs(detail::meta_at(c, "rng"));
  rs >> rng_;
  best_epoch_ = std::stoi(detail::meta_at(c, "best_epoch"));
  best_er_ = std::strtod(detail::meta_at(c, "best_er").c_str(), nullptr);
  opt_.load(c);
  history_.clear();
  const auto h = c.get<double>("history");
  for (std::size_t i = 0; i + detail::kHistoryCols <= h.size(); i += detail::kHistoryCols) {
    metrics::HistoryRow r;
    r.epoch = static_cast<int>(h[i]);
    r.loss = h[i + 1];
    r.scores.er = h[i + 2];
    r.scores.f = h[i + 3];
    r.scores.le = h[i + 4];
    r.scores.lr = h[i + 5];
    r.scores.matched = static_cast<long>(h[i + 6]);
    r.scores.n_ref = static_cast<long>(h[i + 7]);
    r.scores.distance_sum = h[i + 8];
    if (r.epoch == best_epoch_) best_scores_ = r.scores;
    history_.push_back(r);
  }
}

/// Rebuilds the run config stored in a checkpoint.
inline RunConfig checkpoint_config(const diff::Checkpoint& c) {
  return parse_run_config(detail::unescape_meta(detail::meta_at(c, "run_config")));
}

inline features::FeatureStats checkpoint_stats(const diff::Checkpoint& c) {
  features::FeatureStats s;
  s.config_hash = std::stoull(detail::meta_at(c, "feature_hash"));
  s.mean = c.get<double>("stats.mean");
  s.stddev = c.get<double>("stats.std");
  return s;
}

// ------------------------------------------------------------------- data

struct DataContext {
  data::DatasetLayout layout{"."};
  SegmentBank train, test;
  features::FeatureStats stats;
};

inline DataContext prepare_data(const RunConfig& cfg) {
  DataContext d;
  d.layout = data::DatasetLayout(cfg.dataset.root);
  d.train = load_bank(d.layout, cfg.dataset.train_split, cfg.features, cfg.dataset.train_clips);
  if (d.train.empty()) throw ConfigError("training split '" + cfg.dataset.train_split + "' is empty");
  d.test = load_bank(d.layout, cfg.dataset.test_split, cfg.features, cfg.dataset.test_clips);
  if (d.test.empty()) throw ConfigError("test split '" + cfg.dataset.test_split + "' is empty");
  d.stats = load_or_compute_stats(d.layout, d.train, cfg.features);
  return d;
}

// --------------------------------------------------------------- the loop

struct TrialResult {
  std::vector<metrics::HistoryRow> history;
  metrics::SeldScores last, best;
  int best_epoch = -1;
};

inline void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw MissingFileError("cannot write " + p.string());
  os << s;
}

/// Trains one model into `dir`. When `resume` is set and dir/ckpt_last
/// holds a run state, training continues from it.
inline TrialResult train_loop(const RunConfig& cfg, const DataContext& data, const fs::path& dir,
                              std::uint64_t seed, std::ostream* log = nullptr, bool resume = false) {
  cfg.validate();
  fs::create_directories(dir);
  write_text(dir / "config.used", serialize(cfg));
  Trainer tr(cfg, data.stats, seed);
  if (resume && fs::exists(dir / "ckpt_last")) tr.restore(diff::Checkpoint::load((dir / "ckpt_last").string()));
  const int total = cfg.train.schedule().total_epochs();
  while (tr.epoch() < total && !tr.out_of_steps()) {
    const auto info = tr.train_epoch(data.train);
    const bool last = tr.epoch() >= total || tr.out_of_steps();
    if (tr.epoch() % cfg.train.eval_every != 0 && !last) continue;
    const auto s = tr.evaluate(data.test);
    if (tr.record(info.mean_loss, s)) tr.save(dir / "ckpt_best", false);
    metrics::write_history(dir / "history.csv", tr.history());
    tr.save(dir / "ckpt_last", true);
    if (log) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "epoch %3d  step %6ld  loss %.5f  ", tr.epoch(), tr.step(), info.mean_loss);
      *log << buf << metrics::format_scores(s) << std::endl;
    }
  }
  if (tr.history().empty()) {
    const auto s = tr.evaluate(data.test);
    tr.record(0.0, s);
    tr.save(dir / "ckpt_best", false);
    metrics::write_history(dir / "history.csv", tr.history());
    tr.save(dir / "ckpt_last", true);
  }
  TrialResult r;
  r.history = tr.history();
  r.last = r.history.back().scores;
  r.best = tr.best_scores();
  r.best_epoch = tr.best_epoch();
  return r;
}

// ----------------------------------------------------------------- trials

struct MeanStd {
  double mean = 0, std = 0;
};

/// Mean and population standard deviation.
inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  double q = 0;
  for (double x : v) q += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(q / static_cast<double>(v.size()));
  return r;
}

struct ScoreSummary {
  MeanStd er, f, le, lr;
};

inline ScoreSummary summarize(const std::vector<metrics::SeldScores>& s) {
  std::vector<double> er, f, le, lr;
  for (const auto& x : s) {
    er.push_back(x.er);
    f.push_back(x.f);
    le.push_back(x.le);
    lr.push_back(x.lr);
  }
  return {mean_std(er), mean_std(f), mean_std(le), mean_std(lr)};
}

/// "0.299 ± 0.030"
inline std::string format_mean_std(const MeanStd& m, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, m.mean, decimals, m.std);
  return buf;
}

struct TrialsResult {
  std::vector<TrialResult> trials;
  ScoreSummary last, best;
};

inline std::string trials_summary_text(const TrialsResult& t) {
  std::ostringstream os;
  os << "format seld-trials-1\nn_trials " << t.trials.size() << '\n';
  auto block = [&](const char* sel, const ScoreSummary& s) {
    char buf[128];
    for (const auto& [name, m] : {std::pair{"ER", s.er}, {"F", s.f}, {"LE", s.le}, {"LR", s.lr}}) {
      std::snprintf(buf, sizeof buf, "%s.%s %.6f %.6f\n", sel, name, m.mean, m.std);
      os << buf;
    }
  };
  block("last", t.last);
  block("best", t.best);
  return os.str();
}

/// Runs cfg.train.n_trials trials with seeds train.seed, seed + 1, ... and
/// writes trials_summary into `dir`.
inline TrialsResult run_trials(const RunConfig& cfg, const DataContext& data, const fs::path& dir,
                               std::ostream* log = nullptr, bool resume = false) {
  TrialsResult res;
  std::vector<metrics::SeldScores> last, best;
  for (int i = 0; i < cfg.train.n_trials; ++i) {
    const fs::path d = cfg.train.n_trials == 1 ? dir : dir / ("trial" + std::to_string(i));
    if (log && cfg.train.n_trials > 1) *log << "trial " << i << std::endl;
    res.trials.push_back(train_loop(cfg, data, d, cfg.train.seed + static_cast<std::uint64_t>(i), log, resume));
    last.push_back(res.trials.back().last);
    best.push_back(res.trials.back().best);
  }
  res.last = summarize(last);
  res.best = summarize(best);
  write_text(dir / "config.used", serialize(cfg));
  write_text(dir / "trials_summary", trials_summary_text(res));
  return res;
}

// ------------------------------------------------------------------ sweep

struct SweepRow {
  model::PsMode ps_mode;
  model::OutputFormat format;
  TrialsResult result;
};

inline std::string sweep_table(const std::vector<SweepRow>& rows, bool best = false) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %-10s %-16s %-16s %-16s %-16s\n", "ps_mode", "format", "ER", "F",
                "LE (deg)", "LR");
  os << buf;
  for (const auto& r : rows) {
    const auto& s = best ? r.result.best : r.result.last;
    std::snprintf(buf, sizeof buf, "%-8s %-10s %-16s %-16s %-16s %-16s\n", model::to_string(r.ps_mode).c_str(),
                  model::to_string(r.format).c_str(), format_mean_std(s.er, 3).c_str(),
                  format_mean_std(s.f, 3).c_str(), format_mean_std(s.le, 1).c_str(),
                  format_mean_std(s.lr, 3).c_str());
    os << buf;
  }
  return os.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "ps_mode,format,selection,ER_mean,ER_std,F_mean,F_std,LE_mean,LE_std,LR_mean,LR_std\n";
  char buf[256];
  for (const auto& r : rows)
    for (const auto& [sel, s] : {std::pair{"last", r.result.last}, {"best", r.result.best}}) {
      std::snprintf(buf, sizeof buf, "%s,%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                    model::to_string(r.ps_mode).c_str(), model::to_string(r.format).c_str(), sel,
                    s.er.mean, s.er.std, s.f.mean, s.f.std, s.le.mean, s.le.std, s.lr.mean, s.lr.std);
      os << buf;
    }
  return os.str();
}

/// Every (ps_mode, format) pair of cfg.sweep, each into dir/<ps>_<format>/.
/// Writes sweep_report (table, last and best epoch) and sweep_report.csv.
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg, const fs::path& dir,
                                       std::ostream* log = nullptr) {
  cfg.validate();
  const DataContext data = prepare_data(cfg);
  std::vector<SweepRow> rows;
  for (auto ps : cfg.sweep.ps_modes)
    for (auto fmt : cfg.sweep.formats) {
      RunConfig c = cfg;
      c.model.ps_mode = ps;
      c.model.output_format = fmt;
      const std::string name = model::to_string(ps) + "_" + model::to_string(fmt);
      if (log) *log << "== " << name << std::endl;
      rows.push_back({ps, fmt, run_trials(c, data, dir / name, log)});
    }
  write_text(dir / "sweep_report", "selection: last epoch\n" + sweep_table(rows) +
                                       "\nselection: best ER\n" + sweep_table(rows, true));
  write_text(dir / "sweep_report.csv", sweep_csv(rows));
  return rows;
}

// ------------------------------------------------------------- evaluation

/// Scores a saved checkpoint on `split`. The model config of `cfg` must
/// hash to the checkpoint's.
inline metrics::SeldScores evaluate_checkpoint(const fs::path& ckpt_path, const RunConfig& cfg,
                                               const std::string& split,
                                               std::vector<data::FrameEvents>* predictions = nullptr) {
  const auto ckpt = diff::Checkpoint::load(ckpt_path.string());
  if (ckpt.config_hash != cfg.model.hash())
    throw ConfigError(ckpt_path.string() + ": model config hash mismatch (checkpoint " +
                      std::to_string(ckpt.config_hash) + ", config " + std::to_string(cfg.model.hash()) + ")");
  const auto stats = checkpoint_stats(ckpt);
  if (stats.config_hash != cfg.features.hash())
    throw ConfigError(ckpt_path.string() + ": feature config hash mismatch");
  Trainer tr(cfg, stats, 0);
  tr.restore(ckpt);
  const data::DatasetLayout layout(cfg.dataset.root);
  const auto bank = load_bank(layout, split, cfg.features,
                              split == cfg.dataset.test_split ? cfg.dataset.test_clips
                              : split == cfg.dataset.train_split ? cfg.dataset.train_clips : 0);
  if (predictions) *predictions = tr.predict(bank);
  return tr.evaluate(bank);
}

/// Runs a checkpoint over an arbitrary-length FOA clip, 4 s at a time.
inline data::FrameEvents infer_clip(const Trainer& tr, const data::FoaClip& clip) {
  const auto segs = data::segment_clips(clip);
  if (segs.empty()) return {};
  const features::Featurizer fz(tr.config().features);
  SegmentBank bank;
  for (const auto& s : segs) bank.segments.push_back({fz.featurize(s.audio, s.id), {}, s.n_frames});
  EvalSection ev = tr.config().eval;
  ev.oracle_sed = ev.oracle_doa = false;
  const auto preds = tr.predict(bank, ev);
  data::FrameEvents out;
  for (const auto& p : preds)
    for (const auto& f : p) {
      if (static_cast<int>(out.size()) >= clip.n_frames) break;
      out.push_back(f);
    }
  return out;
}

}  // namespace seld::trainer
