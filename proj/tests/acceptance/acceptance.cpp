// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: atir_acceptance [out_dir] [desk_config]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "atir/cli.hpp"
#include "atir/error.hpp"
#include "atir/evalx.hpp"
#include "atir/mining.hpp"
#include "atir/pipeline.hpp"
#include "atir/retrieval.hpp"
#include "atir/selector.hpp"
#include "atir/training.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace atir;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and thresholds.
constexpr double kMetricTol = 1e-12;
constexpr double kMetricSeconds = 5.0;
constexpr double kInfonceGradRelTol = 1e-4;
constexpr double kSelectorGradRelTol = 1e-6;
constexpr double kGradSeconds = 30.0;
constexpr double kIdentityTol = 1e-9;
constexpr double kSelectorF1 = 0.95;
constexpr std::size_t kSelectorMaxSteps = 500;
constexpr double kSelectorSeconds = 60.0;
constexpr double kDeskRecall1 = 0.80;
constexpr double kPipelineSeconds = 600.0;
constexpr double kShuffleBothSlack = 0.01;
constexpr std::size_t kRandomCases = 200;
constexpr std::size_t kSearchCases = 100;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

// --- 1: metric oracles ---------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> pick_k(1, 20);
  double worst = 0.0;
  for (std::size_t c = 0; c < kRandomCases; ++c) {
    Qrels qrels;
    testgen::random_judgments(rng, qrels, "q", 25);
    const auto run = testgen::random_run(rng, "q", 25, 20);
    const std::size_t k = pick_k(rng);
    worst = std::max(worst, std::abs(evalx::recall_at_k(run, qrels, k) - oracle::recall(run, qrels, k)));
    worst = std::max(worst, std::abs(evalx::ndcg_at_k(run, qrels, k) - oracle::ndcg(run, qrels, k)));
  }
  const double secs = seconds_since(t0);
  return {worst <= kMetricTol && secs < kMetricSeconds,
          "max |diff| = " + fmt("%.2e", worst) + " over 200 cases, " + fmt("%.2f", secs) + " s"};
}

// --- 2: gradients ----------------------------------------------------------

struct GradFixture {
  encoder::RetrieverModel model;
  Corpus corpus{5};
  std::vector<training::TrainingInstance> batch;
};

GradFixture grad_fixture(std::mt19937_64& rng, std::size_t batch_size, std::size_t d) {
  GradFixture f;
  encoder::ModelDims dims;
  dims.vocab_buckets = 41;
  dims.d = d;
  dims.d_out = std::max<std::size_t>(2, d - 2);
  dims.frame_dim = 5;
  f.model = encoder::RetrieverModel::initialize(dims, rng(), 0.3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& w : f.model.selector.weights) w = g(rng);
  const std::size_t n_docs = batch_size + 4;
  for (std::size_t i = 0; i < n_docs; ++i) f.corpus.add(testgen::random_sequence(rng, testgen::doc_name(i), 5));
  std::uniform_int_distribution<std::size_t> pick(0, n_docs - 1);
  for (std::size_t b = 0; b < batch_size; ++b) {
    training::TrainingInstance inst;
    inst.query = testgen::random_sequence(rng, "q" + std::to_string(b), 5);
    inst.positive = testgen::doc_name(b);
    for (int k = 0; k < 2; ++k) {
      const auto neg = testgen::doc_name(pick(rng));
      if (neg != inst.positive && std::find(inst.hard_negatives.begin(), inst.hard_negatives.end(), neg) ==
                                      inst.hard_negatives.end()) {
        inst.hard_negatives.push_back(neg);
      }
    }
    f.batch.push_back(std::move(inst));
  }
  return f;
}

double infonce_rel_error(GradFixture& f, Matrix<double>& params, const Matrix<double>& analytic,
                         const training::TrainOptions& opt) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.data().size(); ++i) {
    const double orig = params.data()[i];
    params.data()[i] = orig + h;
    const double lp = training::infonce_loss(f.model, f.batch, f.corpus, opt);
    params.data()[i] = orig - h;
    const double lm = training::infonce_loss(f.model, f.batch, f.corpus, opt);
    params.data()[i] = orig;
    const double fd = (lp - lm) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic.data()[i]) / std::max(std::abs(fd) + std::abs(analytic.data()[i]), 1e-6));
  }
  return worst;
}

Outcome gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double infonce_worst = 0.0;
  for (std::size_t trial = 0; trial < 8; ++trial) {
    auto f = grad_fixture(rng, 1 + trial, 4 + 2 * (trial % 7));
    for (auto fe : {encoder::AudioFrontEnd::all_frames(), encoder::AudioFrontEnd::selector()}) {
      const training::TrainOptions opt{fe};
      const auto lg = training::infonce_loss_and_grad(f.model, f.batch, f.corpus, opt);
      const auto text = lg.grads.text_table_dense(f.model.dims.vocab_buckets);
      infonce_worst = std::max(infonce_worst, infonce_rel_error(f, f.model.text_table, text, opt));
      infonce_worst = std::max(infonce_worst, infonce_rel_error(f, f.model.audio_proj, lg.grads.audio_proj, opt));
      infonce_worst = std::max(infonce_worst, infonce_rel_error(f, f.model.fusion, lg.grads.fusion, opt));
    }
  }
  double selector_worst = 0.0;
  const double h = 1e-6;
  std::normal_distribution<double> g(0.0, 0.5);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t trial = 0; trial < 32; ++trial) {
    const std::size_t dim = 1 + trial % 16, n = 1 + trial % 8;
    auto model = selector::SelectorModel::zeros(dim);
    for (auto& w : model.weights) w = g(rng);
    model.bias = g(rng);
    const auto frames = testgen::random_frames(rng, n, dim);
    selector::FrameLabels labels;
    for (std::size_t i = 0; i < n; ++i) labels.labels.push_back(coin(rng));
    const auto an = selector::selector_loss_and_grad(model, frames, labels);
    auto check = [&](double& p, double analytic) {
      const double orig = p;
      p = orig + h;
      const double lp = selector::selector_loss_and_grad(model, frames, labels).loss;
      p = orig - h;
      const double lm = selector::selector_loss_and_grad(model, frames, labels).loss;
      p = orig;
      const double fd = (lp - lm) / (2 * h);
      selector_worst = std::max(selector_worst, std::abs(fd - analytic) / std::max(std::abs(fd), 1.0));
    };
    for (std::size_t i = 0; i < dim; ++i) check(model.weights[i], an.grad_w[i]);
    check(model.bias, an.grad_b);
  }
  const double secs = seconds_since(t0);
  return {infonce_worst <= kInfonceGradRelTol && selector_worst <= kSelectorGradRelTol && secs < kGradSeconds,
          "InfoNCE rel err " + fmt("%.2e", infonce_worst) + ", selector rel err " + fmt("%.2e", selector_worst) +
              ", " + fmt("%.2f", secs) + " s"};
}

// --- 3: closed forms -------------------------------------------------------

Outcome closed_forms() {
  double worst_nce = 0.0, worst_bce = 0.0;
  for (std::size_t n : {1u, 4u, 15u, 127u}) {
    const std::vector<double> neg(n, 0.41);
    worst_nce = std::max(worst_nce, std::abs(training::infonce_from_scores(0.41, neg, 0.05) - std::log(double(n + 1))));
  }
  std::mt19937_64 rng(303);
  for (std::size_t t : {1u, 10u, 100u}) {
    const auto frames = testgen::random_frames(rng, t, 8);
    selector::FrameLabels labels;
    for (std::size_t i = 0; i < t; ++i) labels.labels.push_back(i % 3 == 0);
    const auto r = selector::selector_loss_and_grad(selector::SelectorModel::zeros(8), frames, labels);
    worst_bce = std::max(worst_bce, std::abs(r.loss - double(t) * std::log(2.0)));
  }
  return {worst_nce <= kIdentityTol && worst_bce <= kIdentityTol,
          "|InfoNCE - ln(N+1)| = " + fmt("%.2e", worst_nce) + ", |BCE - T ln 2| = " + fmt("%.2e", worst_bce)};
}

// --- 4: selector learning --------------------------------------------------

Outcome selector_learning(const cli::ExperimentConfig& desk) {
  const auto t0 = Clock::now();
  audiosynth::SynthConfig synth;  // defaults: filler_ratio 0.5
  const auto bench = audiosynth::build_synthetic_benchmark(synth, {300, 100, 2.0, 0});
  const auto all = pipeline::selector_training_data(bench.corpus, bench.queries);
  std::vector<selector::LabelledSegment> train, held_out;
  for (std::size_t i = 0; i < all.size(); ++i) (i % 5 == 4 ? held_out : train).push_back(all[i]);
  auto opt = desk.pipeline.selector_opt;
  opt.max_steps = kSelectorMaxSteps;
  const auto trained = selector::train_selector(train, opt);
  const auto f1 = selector::token_f1(trained.model, held_out);
  const double secs = seconds_since(t0);
  return {f1.f1 >= kSelectorF1 && trained.steps <= kSelectorMaxSteps && trained.model.threshold == 0.5 &&
              secs < kSelectorSeconds,
          "held-out token F1 " + fmt("%.4f", f1.f1) + " on " + std::to_string(held_out.size()) + " segments after " +
              std::to_string(trained.steps) + " steps, " + fmt("%.1f", secs) + " s"};
}

// --- 5: desk-scale pipeline -------------------------------------------------

struct DeskRun {
  cli::ExperimentConfig cfg;
  std::optional<encoder::RetrieverModel> model;
  std::optional<selector::SelectorModel> selector;
  std::optional<audiosynth::SyntheticBenchmark> bench;
  std::optional<evalx::EvalSuite> suite;
};

Outcome desk_pipeline(DeskRun& desk) {
  const auto t0 = Clock::now();
  for (const auto& name : {"synth", "train-selector", "train", "index", "search", "eval"}) {
    const auto t = Clock::now();
    const auto m = cli::run_command(name, desk.cfg);
    std::printf("  %-15s %7.1f s  %zu artifacts\n", name, seconds_since(t), m.artifacts.size());
    std::fflush(stdout);
  }
  const double secs = seconds_since(t0);
  std::printf("%s", read_bytes(desk.cfg.paths.out_dir / "reports" / "metrics.txt").c_str());
  const auto asr = desk.cfg.paths.out_dir / "reports" / "asr.txt";
  if (fs::exists(asr)) std::printf("ASR channel baseline:\n%s", read_bytes(asr).c_str());

  const auto metrics = nlohmann::json::parse(read_bytes(desk.cfg.paths.out_dir / "reports" / "metrics.json"));
  const double r1 = metrics.at("IAT->T").at("recall").at("1").get<double>();
  const double chance = 1.0 / double(desk.cfg.size.n_docs);
  desk.model = encoder::load_checkpoint(desk.cfg.paths.model);
  desk.selector = selector::load_selector(desk.cfg.paths.selector);
  desk.bench = cli::load_benchmark(desk.cfg, true);
  desk.suite = evalx::build_eval_suite(*desk.bench, desk.cfg.pipeline.workers);
  return {r1 >= kDeskRecall1 && secs < kPipelineSeconds,
          "IAT->T R@1 " + fmt("%.4f", r1) + " (chance " + fmt("%.4f", chance) + "), pipeline " + fmt("%.1f", secs) +
              " s"};
}

// --- 6: ablations -----------------------------------------------------------

Outcome ablations(const DeskRun& desk) {
  if (!desk.model) throw DataError("desk pipeline did not produce a model");
  // Same variants as evalx::ablate_components, but the full model comes from
  // the pipeline run and every variant reuses its trained selector.
  std::vector<evalx::VariantRow> variants;
  variants.push_back({"full", evalx::evaluate_settings(*desk.model, *desk.suite, desk.cfg.pipeline.front_end(), {1, 5},
                                                       desk.cfg.pipeline.workers)
                                  .report});
  auto no_selector = desk.cfg.pipeline;
  no_selector.use_selector = false;
  auto no_stage1 = desk.cfg.pipeline;
  no_stage1.run_stage1 = false;
  auto no_stage2 = desk.cfg.pipeline;
  no_stage2.run_stage2 = false;
  for (const auto& [name, pc] : std::vector<std::pair<std::string, pipeline::PipelineConfig>>{
           {"no-selector", no_selector}, {"no-stage-I", no_stage1}, {"no-stage-II", no_stage2}}) {
    const auto t = Clock::now();
    const auto trained = pipeline::train_pipeline(*desk.bench, pc, &*desk.selector);
    variants.push_back(
        {name, evalx::evaluate_settings(trained.model, *desk.suite, pc.front_end(), {1, 5}, pc.workers).report});
    std::printf("  trained %-12s %6.1f s\n", name.c_str(), seconds_since(t));
    std::fflush(stdout);
  }
  const auto rows = evalx::ablation_table(variants);
  const auto table = evalx::ablation_report(rows);
  evalx::write_table(table, desk.cfg.paths.out_dir / "reports", "ablation");
  std::printf("%s", table.to_text().c_str());

  const double full = rows[0].mean_recall1, no_sel = rows[1].mean_recall1, no_s1 = rows[2].mean_recall1,
               no_s2 = rows[3].mean_recall1;
  const bool order = full >= no_sel && no_sel >= no_s1;
  const bool s2_largest = rows[3].delta_recall1 <= rows[1].delta_recall1 && rows[3].delta_recall1 <= rows[2].delta_recall1;
  std::string detail = "mean R@1 full " + fmt("%.4f", full) + ", no-selector " + fmt("%.4f", no_sel) +
                       ", no-stage-I " + fmt("%.4f", no_s1) + ", no-stage-II " + fmt("%.4f", no_s2) +
                       "; full>=no-sel>=no-S1 " + (order ? "holds" : "fails") + ", largest drop from " +
                       (s2_largest ? "no-stage-II" : rows[2].delta_recall1 <= rows[1].delta_recall1 ? "no-stage-I"
                                                                                                  : "no-selector");
  return {order && s2_largest, detail};
}

// --- 7: perturbations -------------------------------------------------------

Outcome perturbations(const DeskRun& desk) {
  if (!desk.model) throw DataError("desk pipeline did not produce a model");
  const auto rows = evalx::run_perturbation_study(*desk.model, *desk.suite, desk.cfg.pipeline.front_end(),
                                                  desk.cfg.perturb_seeds, desk.cfg.pipeline.workers);
  const auto table = evalx::perturbation_report(rows);
  evalx::write_table(table, desk.cfg.paths.out_dir / "reports", "perturbation");
  std::printf("%s", table.to_text().c_str());
  const double original = rows[0].mean_recall1(), order = rows[1].mean_recall1(), position = rows[2].mean_recall1(),
               both = rows[3].mean_recall1();
  return {original > both && both <= std::min(order, position) + kShuffleBothSlack,
          "mean R@1 over " + std::to_string(desk.cfg.perturb_seeds.size()) + " seeds: Original " +
              fmt("%.4f", original) + ", ShuffleOrder " + fmt("%.4f", order) + ", ShufflePosition " +
              fmt("%.4f", position) + ", ShuffleBoth " + fmt("%.4f", both)};
}

// --- 8: selector vs pooling ------------------------------------------------

Outcome pooling(const DeskRun& desk) {
  if (!desk.model) throw DataError("desk pipeline did not produce a model");
  const auto rows = evalx::compare_selector_vs_pooling(*desk.model, *desk.suite, desk.cfg.pool_ks,
                                                       desk.cfg.pipeline.workers);
  const auto table = evalx::pooling_report(rows);
  evalx::write_table(table, desk.cfg.paths.out_dir / "reports", "pooling");
  std::printf("%s", table.to_text().c_str());
  bool pass = true;
  std::string detail = "mean R@1 selector " + fmt("%.4f", rows[0].report.mean_recall(1));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double r = rows[i].report.mean_recall(1);
    pass = pass && rows[0].report.mean_recall(1) >= r;
    detail += ", " + rows[i].name + " " + fmt("%.4f", r);
  }
  return {pass, detail};
}

// --- 9 / 10: retrieval and mining oracles ----------------------------------

Outcome retrieval_exactness() {
  std::mt19937_64 rng(909);
  std::size_t mismatches = 0, prefix_failures = 0;
  for (std::size_t c = 0; c < kSearchCases; ++c) {
    const std::size_t m = 1 + c * 3, d = 2 + c % 14, k = 1 + (c * 13) % 120;
    const auto index = oracle::random_index(rng, m, d);
    const auto q = oracle::random_unit(rng, d);
    if (retrieval::search(index, q, k).entries() != oracle::search(index, q, k)) ++mismatches;
    const auto deep = retrieval::search(index, q, 100).entries();
    for (std::size_t kk : {1u, 5u, 10u, 100u}) {
      const auto shallow = retrieval::search(index, q, kk).entries();
      if (shallow.size() != std::min(kk, m) || !std::equal(shallow.begin(), shallow.end(), deep.begin())) {
        ++prefix_failures;
      }
    }
  }
  return {mismatches == 0 && prefix_failures == 0, std::to_string(mismatches) + " oracle mismatches, " +
                                                       std::to_string(prefix_failures) + " prefix failures over " +
                                                       std::to_string(kSearchCases) + " cases"};
}

Outcome mining_equivalence() {
  std::mt19937_64 rng(1010);
  std::size_t mismatches = 0, leaks = 0;
  for (std::size_t c = 0; c < kRandomCases; ++c) {
    const auto run = testgen::random_run(rng, "q", 60, 50);
    mining::MiningConfig cfg;
    cfg.top_k_pool = 1 + c % 50;
    cfg.max_hard_negatives = 1 + c % cfg.top_k_pool;
    cfg.require_positive_found = c % 4 != 0;
    std::vector<std::string> positives;
    std::uniform_int_distribution<std::size_t> doc(0, 59), count(1, 2);
    for (std::size_t i = count(rng); i > 0; --i) positives.push_back(testgen::doc_name(doc(rng)));
    const auto got = mining::mine_hard_negatives(run, positives, cfg);
    const auto want = oracle::mine(run, positives, cfg);
    if (got.hard != want.hard || got.false_negatives != want.false_negatives ||
        got.positive_found != want.positive_found) {
      ++mismatches;
    }
    for (const auto& h : got.hard) {
      if (got.positive_found && std::count(positives.begin(), positives.end(), h)) ++leaks;
    }
  }
  return {mismatches == 0 && leaks == 0, std::to_string(mismatches) + " oracle mismatches, " + std::to_string(leaks) +
                                             " positives among hard negatives over 200 runs"};
}

// --- 11: determinism --------------------------------------------------------

Outcome determinism(const fs::path& root) {
  auto run_once = [&](const std::string& leaf) {
    const auto out = root / leaf;
    fs::remove_all(out);
    const auto cfg = cli::load_experiment_config(
        std::nullopt, {"paths.out_dir=" + out.string(), "bench.n_docs=120", "bench.n_queries=30",
                       "bench.n_train_queries=60", "synth.frame_dim=32", "model.vocab_buckets=1024", "model.d=32",
                       "model.d_out=32", "selector_opt.max_steps=60", "selector_opt.lr_scale=2000",
                       "stage1.lr_scale=500", "stage2.lr_scale=500", "stage1.epochs=2", "stage2.epochs=1",
                       "train.stage1_pairs_per_doc=4", "eval.asr=false"});
    for (const auto& name : {"synth", "train-selector", "train", "index", "search"}) cli::run_command(name, cfg);
    return out;
  };
  const auto a = run_once("determinism_a");
  const auto b = run_once("determinism_b");
  std::vector<fs::path> files = {"selector.json", "stage1.json", "model.json", "mined.jsonl", "index.text.bin",
                                 "index.audio.bin"};
  for (const auto* tag : {"a2t", "t2a", "iat2t", "iat2a"}) files.push_back(fs::path("runs") / (std::string("run.") + tag + ".tsv"));
  std::size_t differing = 0;
  std::string first;
  for (const auto& f : files) {
    if (read_bytes(a / f) != read_bytes(b / f)) {
      ++differing;
      if (first.empty()) first = f.string();
    }
  }
  return {differing == 0, std::to_string(files.size() - differing) + "/" + std::to_string(files.size()) +
                              " run files, checkpoints and indexes byte-identical" +
                              (first.empty() ? "" : "; first difference " + first)};
}

// --- 12: latency -------------------------------------------------------------

Outcome latency(const DeskRun& desk) {
  if (!desk.model) throw DataError("desk pipeline did not produce a model");
  auto synth = desk.cfg.synth;
  synth.filler_ratio = 0.8;
  const auto heavy = audiosynth::build_synthetic_benchmark(synth, {200, 50, 2.0, 0});
  const auto suite = evalx::build_eval_suite(heavy);
  const auto rows = evalx::bench_latency({{"selector", &*desk.model, encoder::AudioFrontEnd::selector()},
                                          {"all-frames", &*desk.model, encoder::AudioFrontEnd::all_frames()}},
                                         suite, desk.cfg.latency);
  const auto table = evalx::latency_report(rows);
  evalx::write_table(table, desk.cfg.paths.out_dir / "reports", "latency_filler_heavy");
  std::printf("%s", table.to_text().c_str());
  const bool shaped = table.rows.size() == 2 && table.header.size() == 2 + evalx::kAllSettings.size() + 4;
  return {shaped && rows[0].processed_frames < rows[1].processed_frames,
          "processed frames selector " + std::to_string(rows[0].processed_frames) + " vs all-frames " +
              std::to_string(rows[1].processed_frames) + " (filler ratio 0.8); mean ms " + fmt("%.3f", rows[0].mean_ms) +
              " vs " + fmt("%.3f", rows[1].mean_ms)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::path(ATIR_ACCEPTANCE_DIR);
  const std::string desk_config = argc > 2 ? argv[2] : ATIR_DESK_CONFIG;
  fs::create_directories(out_dir);

  DeskRun desk;
  std::vector<std::pair<int, Outcome>> results;
  auto run = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    std::printf("== criterion %d: %s\n", id, name.c_str());
    std::fflush(stdout);
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    o.detail += " [" + fmt("%.1f", seconds_since(t0)) + " s]";
    results.push_back({id, o});
  };

  try {
    desk.cfg = cli::load_experiment_config(desk_config, {"paths.out_dir=" + (out_dir / "desk").string()});
  } catch (const std::exception& e) {
    std::printf("cannot load desk config: %s\n", e.what());
    return 2;
  }
  fs::remove_all(desk.cfg.paths.out_dir);

  run(1, "metric oracles", metric_oracles);
  run(2, "gradient correctness", gradients);
  run(3, "closed-form loss identities", closed_forms);
  run(4, "selector learning", [&] { return selector_learning(desk.cfg); });
  run(5, "desk-scale end-to-end retrieval", [&] { return desk_pipeline(desk); });
  run(6, "ablation directions", [&] { return ablations(desk); });
  run(7, "perturbation direction", [&] { return perturbations(desk); });
  run(8, "selector vs pooling", [&] { return pooling(desk); });
  run(9, "retrieval exactness", retrieval_exactness);
  run(10, "mining rule equivalence", mining_equivalence);
  run(11, "determinism", [&] { return determinism(out_dir); });
  run(12, "latency report", [&] { return latency(desk); });

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::printf("\n");
  int failed = 0;
  for (const auto& [id, o] : results) {
    std::printf("%s criterion %2d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", int(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
