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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "seld/trainer/train.hpp"
#include "support/run_fixtures.hpp"

using namespace seld;
using namespace seld::trainer;

namespace {

diff::ParameterStore<double> scalar_store(double v, double g) {
  diff::ParameterStore<double> s;
  s.add("p", {1}, diff::InitSpec::fill(v));
  s.at("p").impl()->grad_buffer()[0] = g;
  return s;
}

void set_grad(diff::ParameterStore<double>& s, double g) {
  s.zero_grad();
  s.at("p").impl()->grad_buffer()[0] = g;
}

// One shared small dataset: 6 train / 2 test clips of 4 s, 64 mels.
struct SmallData {
  RunConfig cfg;
  DataContext data;
};

const SmallData& small_data() {
  static SmallData* d = [] {
    auto* s = new SmallData;
    const auto root = oracle::fresh_dir("trainer_data");
    s->cfg = oracle::tiny_run(root, 6, 2, 64);
    s->cfg.train.batch_size = 4;
    oracle::synth_for(s->cfg);
    s->data = prepare_data(s->cfg);
    return s;
  }();
  return *d;
}

}  // namespace

// ----------------------------------------------------------------- AdamW

TEST(AdamW, ZeroGradientNoDecayLeavesParameters) {
  auto s = scalar_store(0.7, 0.0);
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 5; ++i) opt.step(s, 1e-3);
  EXPECT_EQ(s.at("p").item(), 0.7);
}

TEST(AdamW, ZeroGradientShrinksMultiplicatively) {
  auto s = scalar_store(0.7, 0.0);
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.01});
  opt.step(s, 1e-3);
  EXPECT_DOUBLE_EQ(s.at("p").item(), 0.7 * (1 - 1e-3 * 0.01));
}

TEST(AdamW, FirstStepWithUnitGradientMovesByLr) {
  auto s = scalar_store(0.0, 1.0);
  AdamW<double> opt({0.9, 0.999, 1e-8, 0.0});
  const double lr = 5e-4;
  opt.step(s, lr);
  // m_hat = 1, v_hat = 1 -> update lr / (1 + eps)
  EXPECT_NEAR(s.at("p").item(), -lr / (1 + 1e-8), 1e-18);
  EXPECT_EQ(opt.step_count(), 1);
}

TEST(AdamW, MatchesHandRecurrenceOverSteps) {
  auto s = scalar_store(0.3, 0.0);
  AdamW<double> opt({0.8, 0.95, 1e-6, 0.02});
  double p = 0.3, m = 0, v = 0;
  const double grads[] = {0.5, -1.25, 2.0, 0.1};
  for (int k = 0; k < 4; ++k) {
    set_grad(s, grads[k]);
    opt.step(s, 0.01);
    p -= 0.01 * 0.02 * p;
    m = 0.8 * m + 0.2 * grads[k];
    v = 0.95 * v + 0.05 * grads[k] * grads[k];
    p -= 0.01 * (m / (1 - std::pow(0.8, k + 1))) / (std::sqrt(v / (1 - std::pow(0.95, k + 1))) + 1e-6);
  }
  EXPECT_NEAR(s.at("p").item(), p, 1e-15);
}

TEST(AdamW, FrozenParametersUntouched) {
  auto s = scalar_store(0.5, 1.0);
  s.at("p").set_requires_grad(false);
  AdamW<double> opt;
  opt.step(s, 0.1);
  EXPECT_EQ(s.at("p").item(), 0.5);
}

TEST(AdamW, NonFiniteGradientSkipsThenAborts) {
  auto s = scalar_store(0.5, std::numeric_limits<double>::quiet_NaN());
  AdamW<double> opt;
  for (int i = 0; i < 9; ++i) {
    EXPECT_FALSE(opt.step(s, 0.1).applied);
    EXPECT_EQ(s.at("p").item(), 0.5);
  }
  EXPECT_EQ(opt.bad_steps(), 9);
  EXPECT_THROW(opt.step(s, 0.1), ContractError);

  // a finite step resets the consecutive counter
  AdamW<double> opt2;
  for (int i = 0; i < 5; ++i) opt2.step(s, 0.1);
  set_grad(s, 1.0);
  EXPECT_TRUE(opt2.step(s, 0.1).applied);
  EXPECT_EQ(opt2.bad_steps(), 0);
  EXPECT_EQ(opt2.skipped_total(), 5);
}

TEST(AdamW, StateRoundTripsThroughCheckpoint) {
  auto a = scalar_store(0.2, 0.4), b = scalar_store(0.0, 0.0);
  AdamW<double> oa, ob;
  oa.step(a, 0.01);
  diff::Checkpoint c;
  oa.save(c);
  ob.load(c);
  b.at("p").mutable_data()[0] = a.at("p").item();
  set_grad(a, -0.3);
  set_grad(b, -0.3);
  oa.step(a, 0.01);
  ob.step(b, 0.01);
  EXPECT_EQ(a.at("p").item(), b.at("p").item());
  EXPECT_EQ(ob.step_count(), 2);
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  diff::ParameterStore<double> s;
  s.add("a", {2}, diff::InitSpec::fill(0));
  s.add("b", {1}, diff::InitSpec::fill(0));
  auto& ga = s.at("a").impl()->grad_buffer();
  ga[0] = 3;
  ga[1] = 0;
  s.at("b").impl()->grad_buffer()[0] = 4;
  EXPECT_DOUBLE_EQ(clip_grad_norm(s, 10.0), 5.0);
  EXPECT_EQ(s.at("a").grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm(s, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(s.at("a").grad()[0], 0.6);
  EXPECT_DOUBLE_EQ(s.at("b").grad()[0], 0.8);
}

// ------------------------------------------------------------ LR schedule

TEST(LrSchedule, TwoPhaseDefaults) {
  LrSchedule s;
  EXPECT_EQ(s.total_epochs(), 100);
  EXPECT_EQ(s(0), 0.0005);
  EXPECT_EQ(s(89), 0.0005);
  EXPECT_EQ(s(90), 0.00005);
  EXPECT_EQ(s(99), 0.00005);
}

TEST(LrSchedule, ScaledBoundaryKeepsRatio) {
  LrSchedule s;
  s.epoch_scale = 0.1;
  EXPECT_EQ(s.total_epochs(), 10);
  EXPECT_EQ(s.boundary(), 9);
  EXPECT_EQ(s(8), 0.0005);
  EXPECT_EQ(s(9), 0.00005);
  for (double scale : {0.05, 0.2, 0.3, 0.5, 1.0, 2.0}) {
    s.epoch_scale = scale;
    std::set<double> seen;
    for (int e = 0; e < s.total_epochs(); ++e) seen.insert(s(e));
    EXPECT_LE(seen.size(), 2u);
    EXPECT_NEAR(static_cast<double>(s.boundary()) / s.total_epochs(), 0.9, 0.5 / s.total_epochs() + 1e-12);
  }
}

// ----------------------------------------------------------------- config

TEST(RunConfig, SerializeParseRoundTrip) {
  RunConfig c;
  c.model.ps_mode = model::PsMode::hard;
  c.loss.kind = losses::PitKind::cpit;
  c.train.lr_high = 1.0 / 3.0;
  c.dataset.root = "/tmp/x y";
  c.sweep.ps_modes = {model::PsMode::soft};
  const std::string text = serialize(c);
  const RunConfig d = parse_run_config(text);
  EXPECT_EQ(serialize(d), text);
  EXPECT_EQ(d.train.lr_high, 1.0 / 3.0);
  EXPECT_EQ(d.model.ps_mode, model::PsMode::hard);
  EXPECT_EQ(d.loss.kind, losses::PitKind::cpit);
  EXPECT_EQ(d.dataset.root, "/tmp/x y");
  EXPECT_EQ(d.model.hash(), c.model.hash());
}

TEST(RunConfig, EveryFieldDefaulted) {
  const RunConfig d = parse_run_config(std::string("# nothing\ntrain:\n"));
  EXPECT_EQ(serialize(d), serialize(RunConfig{}));
  EXPECT_EQ(parse_run_config(std::string("")).train.batch_size, 32);
  EXPECT_EQ(d.train.batch_size, 32);
  EXPECT_EQ(d.train.adamw.weight_decay, 0.01);
  EXPECT_EQ(d.train.clip_norm, 5.0);
}

TEST(RunConfig, CommentsListsAndFlowStyle) {
  const auto c = parse_run_config(std::string(
      "model:   # trailing\n  ps_mode: none\n# full line\n  n_heads: 4\n"
      "sweep: {ps_modes: [soft, hard], formats: trackwise}\ntrain:\n  rotate: false\n"));
  EXPECT_EQ(c.model.ps_mode, model::PsMode::none);
  EXPECT_EQ(c.model.n_heads, 4);
  EXPECT_EQ(c.sweep.ps_modes, (std::vector{model::PsMode::soft, model::PsMode::hard}));
  EXPECT_EQ(c.sweep.formats, (std::vector{model::OutputFormat::trackwise}));
  EXPECT_FALSE(c.train.rotate);
  EXPECT_EQ(parse_run_config(std::string("sweep:\n  formats: seldnet, trackwise\n")).sweep.formats.size(), 2u);
}

TEST(RunConfig, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_run_config(std::string("train:\n  batchsize: 3\n")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string("nope:\n  x: 1\n")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string("batch_size: 3\n")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string("- train\n")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string("train:\n  batch_size: [3, {a: 1}]\n")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string("train:\n  batch_size: 3x\n")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string("train:\n  rotate: maybe\n")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string("model:\n  ps_mode: medium\n")), ConfigError);
  EXPECT_THROW(parse_run_config(std::string("train: {batch_size: 3\n")), ConfigError);
  try {
    parse_run_config(std::string("train:\n\n  lr: 1\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("'lr'"), std::string::npos);
  }
}

TEST(RunConfig, OverridesAndValidation) {
  RunConfig c;
  apply_override(c, "train.batch_size=8");
  apply_override(c, "model.output_format = seldnet");
  EXPECT_EQ(c.train.batch_size, 8);
  EXPECT_EQ(c.model.output_format, model::OutputFormat::seldnet);
  EXPECT_THROW(apply_override(c, "train.nope=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "batch_size=1"), ConfigError);
  c.validate();
  c.model.n_classes = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.eval.oracle_sed = c.eval.oracle_doa = true;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ----------------------------------------------------------------- trials

TEST(Trials, PopulationStd) {
  const auto m = mean_std({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_DOUBLE_EQ(m.std, std::sqrt(1.25));
  EXPECT_EQ(format_mean_std({0.299, 0.03}, 3), "0.299 ± 0.030");
  const auto one = mean_std({7.0});
  EXPECT_EQ(one.std, 0.0);
}

// ------------------------------------------------------------------ batch

TEST(Batch, ShapesAndBranchInputs) {
  const auto& sd = small_data();
  EXPECT_EQ(sd.data.train.size(), 6u);
  EXPECT_EQ(sd.data.test.size(), 2u);
  std::mt19937_64 rng(3);
  AugmentOptions aug{true, true, {}};
  const auto b = make_batch<Real>(sd.data.train, {0, 3, 5}, sd.data.stats, aug, rng);
  EXPECT_EQ(b.sed_in.shape(), (diff::Shape{3, 4, 160, 64}));
  EXPECT_EQ(b.doa_in.shape(), (diff::Shape{3, 7, 160, 64}));
  EXPECT_EQ(b.frames, 40u);
  ASSERT_EQ(b.labels.size(), 3u);
  const std::size_t plane = 160 * 64;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t k = 0; k < plane; k += 97)
        ASSERT_EQ(b.sed_in.data()[(i * 4 + c) * plane + k], b.doa_in.data()[(i * 7 + c) * plane + k]);
}

TEST(Batch, PlainBatchIsStandardizedCache) {
  const auto& sd = small_data();
  std::mt19937_64 rng(3);
  const auto b = make_batch<Real>(sd.data.train, {1}, sd.data.stats, {}, rng);
  auto f = sd.data.train.segments[1].features;
  features::standardize(f, sd.data.stats);
  for (std::size_t i = 0; i < f.data.size(); ++i) ASSERT_EQ(b.doa_in.data()[i], f.data[i]);
  const auto ref = data::events_from_rows(sd.data.train.segments[1].labels, 40);
  ASSERT_EQ(b.labels[0].size(), ref.size());
  for (std::size_t t = 0; t < ref.size(); ++t) ASSERT_EQ(b.labels[0][t].size(), ref[t].size());
}

TEST(Batch, CacheReusedOnReload) {
  const auto& sd = small_data();
  int featurized = 0;
  const auto bank = load_bank(sd.data.layout, "train", sd.cfg.features, 6, &featurized);
  EXPECT_EQ(featurized, 0);
  EXPECT_EQ(bank.segments[2].features.data, sd.data.train.segments[2].features.data);
  auto other = sd.cfg.features;
  other.n_mels = 32;
  const auto rebuilt = load_bank(sd.data.layout, "train", other, 2, &featurized);
  EXPECT_EQ(featurized, 2);
  EXPECT_EQ(rebuilt.segments[0].features.mels, 32);
  load_bank(sd.data.layout, "train", sd.cfg.features, 6, &featurized);  // restore the cache
}

// ---------------------------------------------------------------- oracles

TEST(Decode, OracleFlags) {
  model::ModelConfig m = model::tiny_config();
  m.n_classes = 3;
  const std::size_t To = 1, M = 2, K = 3;
  model::ModelOutput<Real> out;
  // track 0 says class 1 at +x, track 1 says class 2 at +y
  out.sed = diff::Tensor<Real>({1, To, M, K}, std::vector<Real>{0.1f, 0.9f, 0.0f, 0.0f, 0.2f, 0.8f});
  out.doa = diff::Tensor<Real>({1, To, M, 3}, std::vector<Real>{1, 0, 0, 0, 1, 0});
  data::FrameEvents ref(1);
  ref[0].push_back({0, 0, 90, 0});  // class 0 near +y
  ref[0].push_back({1, 1, 10, 0});  // class 1 near +x

  EvalSection ev;
  auto plain = decode_item(m, ev, out, 0, &ref);
  ASSERT_EQ(plain[0].size(), 2u);
  EXPECT_EQ(plain[0][0].cls, 1);
  EXPECT_NEAR(plain[0][0].azimuth, 0, 1e-9);

  ev.oracle_doa = true;
  auto od = decode_item(m, ev, out, 0, &ref);
  EXPECT_EQ(od[0][0].cls, 1);
  EXPECT_EQ(od[0][0].azimuth, 10);  // took the class-1 reference direction
  EXPECT_EQ(od[0][1].cls, 2);
  EXPECT_NEAR(od[0][1].azimuth, 90, 1e-9);  // no class-2 reference: unchanged

  ev.oracle_doa = false;
  ev.oracle_sed = true;
  auto os = decode_item(m, ev, out, 0, &ref);
  ASSERT_EQ(os[0].size(), 2u);
  EXPECT_EQ(os[0][0].cls, 0);
  EXPECT_EQ(os[0][0].track, 1);  // +y track
  EXPECT_NEAR(os[0][0].azimuth, 90, 1e-9);
  EXPECT_EQ(os[0][1].cls, 1);
  EXPECT_EQ(os[0][1].track, 0);
  EXPECT_NEAR(os[0][1].azimuth, 0, 1e-9);
  EXPECT_THROW(decode_item(m, ev, out, 0, nullptr), DimensionError);
}

TEST(Decode, OracleSedSeldnetFormat) {
  model::ModelConfig m = model::tiny_config(model::PsMode::soft, model::OutputFormat::seldnet);
  m.n_classes = 2;
  model::ModelOutput<Real> out;
  out.sed = diff::Tensor<Real>({1, 1, 2}, std::vector<Real>{0.0f, 0.0f});
  out.doa = diff::Tensor<Real>({1, 1, 2, 3}, std::vector<Real>{1, 0, 0, 0, -1, 0});
  data::FrameEvents ref(1);
  ref[0].push_back({1, 0, 30, 0});
  EvalSection ev;
  EXPECT_TRUE(decode_item(m, ev, out, 0, &ref)[0].empty());
  ev.oracle_sed = true;
  const auto e = decode_item(m, ev, out, 0, &ref);
  ASSERT_EQ(e[0].size(), 1u);
  EXPECT_EQ(e[0][0].cls, 1);
  EXPECT_NEAR(e[0][0].azimuth, -90, 1e-9);
}

// ---------------------------------------------------------------- trainer

TEST(Trainer, ResumeIsStepExact) {
  const auto& sd = small_data();
  RunConfig cfg = sd.cfg;
  Trainer a(cfg, sd.data.stats, 5);
  auto next = [&](Trainer& t) {
    return make_batch<Real>(sd.data.train, {0, 1, 2, 3}, sd.data.stats, t.augment(), t.rng());
  };
  a.train_step(next(a), 5e-4);
  a.train_step(next(a), 5e-4);
  const auto path = oracle::fresh_dir("trainer_resume") / "state";
  a.save(path, true);

  Trainer b(cfg, sd.data.stats, 999);
  b.restore(diff::Checkpoint::load(path.string()));
  EXPECT_EQ(b.step(), 2);
  const auto sa = a.train_step(next(a), 5e-4);
  const auto sb = b.train_step(next(b), 5e-4);
  EXPECT_EQ(sa.loss, sb.loss);
  for (const auto& [n, p] : a.model().parameters().params()) {
    const auto& q = b.model().parameters().params().at(n).tensor;
    EXPECT_TRUE(std::equal(p.tensor.data().begin(), p.tensor.data().end(), q.data().begin())) << n;
  }
  for (const auto& [n, st] : a.model().parameters().bn_states())
    EXPECT_EQ(st.running_mean, b.model().parameters().bn_states().at(n).running_mean) << n;
}

TEST(Trainer, EvaluateIsDeterministicAndRefusesOtherConfig) {
  const auto& sd = small_data();
  Trainer t(sd.cfg, sd.data.stats, 1);
  const auto s1 = t.evaluate(sd.data.test), s2 = t.evaluate(sd.data.test);
  EXPECT_EQ(metrics::format_scores(s1), metrics::format_scores(s2));
  EXPECT_EQ(s1.distance_sum, s2.distance_sum);

  const auto dir = oracle::fresh_dir("trainer_eval");
  t.save(dir / "ckpt", false);
  const auto e1 = evaluate_checkpoint(dir / "ckpt", sd.cfg, "test");
  const auto e2 = evaluate_checkpoint(dir / "ckpt", sd.cfg, "test");
  EXPECT_EQ(e1.distance_sum, s1.distance_sum);
  EXPECT_EQ(e1.er, e2.er);
  RunConfig other = sd.cfg;
  other.model.ps_mode = model::PsMode::hard;
  EXPECT_THROW(evaluate_checkpoint(dir / "ckpt", other, "test"), ConfigError);
  EXPECT_EQ(serialize(checkpoint_config(diff::Checkpoint::load((dir / "ckpt").string()))), serialize(sd.cfg));
}

TEST(Trainer, PredictionsAsReferencesScorePerfect) {
  const auto& sd = small_data();
  Trainer t(sd.cfg, sd.data.stats, 1);
  EvalSection ev;
  ev.sed_threshold = 0.3;
  const auto preds = t.predict(sd.data.test, ev);
  metrics::ScoreAccumulator acc;
  for (const auto& p : preds) acc.add(p, p);
  const auto s = acc.finish();
  if (s.n_ref > 0) {
    EXPECT_EQ(metrics::format_scores(s), "ER 0.000, F 1.000, LE 0.0, LR 1.000");
  }
}

TEST(Trainer, UntrainedLocalizationNearChance) {
  const auto& sd = small_data();
  Trainer t(sd.cfg, sd.data.stats, 2);
  EvalSection ev;
  ev.oracle_sed = true;  // every reference gets a matched direction
  const auto s = t.evaluate(sd.data.test, ev);
  ASSERT_GT(s.matched, 0);
  EXPECT_GT(s.le, 45.0);
}

TEST(Trainer, EmptySplitIsConfigError) {
  const auto& sd = small_data();
  Trainer t(sd.cfg, sd.data.stats, 1);
  SegmentBank empty;
  empty.split = "none";
  EXPECT_THROW(t.train_epoch(empty), ConfigError);
  EXPECT_THROW(t.evaluate(empty), ConfigError);
}

TEST(TrainLoop, HistoryIsBitIdenticalAcrossRuns) {
  const auto& sd = small_data();
  RunConfig cfg = sd.cfg;
  cfg.train.epoch_scale = 0.02;  // two epochs
  cfg.train.n_trials = 1;
  const auto a = oracle::fresh_dir("trainer_det_a"), b = oracle::fresh_dir("trainer_det_b");
  run_trials(cfg, sd.data, a);
  run_trials(cfg, sd.data, b);
  const auto ha = oracle::slurp(a / "history.csv");
  EXPECT_EQ(ha, oracle::slurp(b / "history.csv"));
  EXPECT_EQ(ha.rfind(metrics::kHistoryHeader, 0), 0u);
  EXPECT_EQ(std::count(ha.begin(), ha.end(), '\n'), 3);
  for (const char* f : {"config.used", "ckpt_best", "ckpt_last", "trials_summary"})
    EXPECT_TRUE(std::filesystem::exists(a / f)) << f;
  EXPECT_EQ(parse_run_config(oracle::slurp(a / "config.used")).train.epoch_scale, 0.02);
}

TEST(TrainLoop, ResumeFromLastMatchesUninterrupted) {
  const auto& sd = small_data();
  RunConfig cfg = sd.cfg;
  cfg.train.epoch_scale = 0.02;
  const auto full = oracle::fresh_dir("trainer_full");
  train_loop(cfg, sd.data, full, 3);
  RunConfig half = cfg;
  half.train.max_steps = 2;  // one epoch of two batches
  const auto part = oracle::fresh_dir("trainer_part");
  train_loop(half, sd.data, part, 3);
  train_loop(cfg, sd.data, part, 3, nullptr, true);
  EXPECT_EQ(oracle::slurp(full / "history.csv"), oracle::slurp(part / "history.csv"));
}

TEST(TrainLoop, MultiTrialSummary) {
  const auto& sd = small_data();
  RunConfig cfg = sd.cfg;
  cfg.train.max_steps = 1;
  cfg.train.n_trials = 2;
  const auto dir = oracle::fresh_dir("trainer_trials");
  const auto r = run_trials(cfg, sd.data, dir);
  ASSERT_EQ(r.trials.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "trial0" / "history.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "trial1" / "history.csv"));
  const auto m = mean_std({r.trials[0].last.le, r.trials[1].last.le});
  EXPECT_EQ(r.last.le.mean, m.mean);
  const auto text = oracle::slurp(dir / "trials_summary");
  EXPECT_NE(text.find("n_trials 2"), std::string::npos);
  EXPECT_NE(text.find("last.LE"), std::string::npos);
  EXPECT_NE(text.find("best.ER"), std::string::npos);
}

TEST(Sweep, SixRowReport) {
  const auto& sd = small_data();
  RunConfig cfg = sd.cfg;
  cfg.train.max_steps = 1;
  const auto dir = oracle::fresh_dir("trainer_sweep");
  const auto rows = run_sweep(cfg, dir);
  ASSERT_EQ(rows.size(), 6u);
  const auto report = oracle::slurp(dir / "sweep_report");
  for (const char* n : {"none", "hard", "soft", "seldnet", "trackwise", "±"})
    EXPECT_NE(report.find(n), std::string::npos) << n;
  const auto csv = oracle::slurp(dir / "sweep_report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
  EXPECT_TRUE(std::filesystem::exists(dir / "soft_trackwise" / "history.csv"));
}

TEST(Infer, CoversClipFrames) {
  const auto& sd = small_data();
  Trainer t(sd.cfg, sd.data.stats, 1);
  auto clip = data::load_clip(sd.data.layout, "test", sd.data.layout.clips("test")[0]);
  clip.n_frames = 37;  // not a whole segment
  for (auto& ch : clip.audio) ch.resize(37 * data::kLabelHopSamples);
  const auto ev = infer_clip(t, clip);
  EXPECT_EQ(ev.size(), 37u);
}
