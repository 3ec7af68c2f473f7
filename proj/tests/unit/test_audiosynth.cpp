#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "atir/audiosynth.hpp"
#include "atir/error.hpp"
#include "atir/selector.hpp"
#include "atir/util.hpp"

using namespace atir;
using namespace atir::audiosynth;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.frame_dim = 16;
  return cfg;
}

}  // namespace

TEST(AudioSynth, TokenCodesAreUnitNormAndStable) {
  const auto cfg = small_config();
  for (const char* w : {"alpha", "beta", "kaloru"}) {
    const auto code = token_code(w, cfg);
    ASSERT_EQ(code.size(), cfg.frame_dim);
    double n = 0.0;
    for (float v : code) n += double(v) * v;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
    EXPECT_GE(code[0], 0.0f);
    EXPECT_EQ(code, token_code(w, cfg));
  }
  EXPECT_NE(token_code("alpha", cfg), token_code("beta", cfg));
}

TEST(AudioSynth, SpansCoverExactlyTheContentFrames) {
  auto cfg = small_config();
  for (double ratio : {0.0, 0.3, 0.5, 0.8}) {
    cfg.filler_ratio = ratio;
    auto seg = featurize_text_as_audio("one two three four", EnvironmentKind::Traffic, cfg, 3);
    ASSERT_NO_THROW(validate_segment(seg, cfg.frame_dim, "t"));
    const auto labels = selector::align_spans_to_labels(seg);
    std::size_t content = 0;
    for (auto l : labels.labels) content += l;
    EXPECT_EQ(content, 4 * cfg.frames_per_token);
    const double filler = double(seg.num_frames() - content) / double(seg.num_frames());
    EXPECT_NEAR(filler, ratio, 0.1);
    EXPECT_EQ(seg.transcript, "one two three four");
  }
}

TEST(AudioSynth, FillerFramesCarryTheSilenceMarker) {
  auto cfg = small_config();
  cfg.noise_scale = {0.0, 0.0, 0.0, 0.0};
  auto seg = featurize_text_as_audio("a b c d e f", EnvironmentKind::Clean, cfg, 0);
  const auto labels = selector::align_spans_to_labels(seg);
  for (std::size_t r = 0; r < seg.num_frames(); ++r) {
    if (labels.labels[r]) {
      EXPECT_GE(seg.frames(r, 0), 0.0f);
    } else {
      EXPECT_LT(seg.frames(r, 0), 0.0f);
    }
  }
}

TEST(AudioSynth, BenchmarkIsDeterministicAcrossWorkerCounts) {
  const auto cfg = small_config();
  const BenchmarkSize size{40, 10, 2.0, 20};
  auto a = build_synthetic_benchmark(cfg, size, nullptr, 1);
  auto b = build_synthetic_benchmark(cfg, size, nullptr, 4);
  EXPECT_EQ(a.corpus, b.corpus);
  EXPECT_EQ(a.queries, b.queries);
  EXPECT_EQ(a.qrels, b.qrels);
  EXPECT_EQ(a.train_queries, b.train_queries);
  EXPECT_EQ(a.train_qrels, b.train_qrels);
}

TEST(AudioSynth, QueriesHaveOnePositiveAndTrainDocsStayDisjoint) {
  const auto cfg = small_config();
  auto bench = build_synthetic_benchmark(cfg, {60, 15, 2.0, 30}, nullptr, 2);
  EXPECT_EQ(bench.corpus.size(), 60u);
  EXPECT_EQ(bench.queries.size() + bench.train_queries.size() + bench.dropped_queries, 45u);
  std::set<std::string> test_docs;
  for (const auto& q : bench.queries) {
    const auto pos = bench.qrels.positives(q.id);
    ASSERT_EQ(pos.size(), 1u);
    EXPECT_TRUE(bench.corpus.contains(pos[0]));
    EXPECT_GE(token_jaccard(q, bench.corpus.at(pos[0])), cfg.min_jaccard);
    test_docs.insert(pos[0]);
  }
  for (const auto& q : bench.train_queries) {
    const auto pos = bench.train_qrels.positives(q.id);
    ASSERT_EQ(pos.size(), 1u);
    EXPECT_FALSE(test_docs.count(pos[0])) << q.id;
  }
}

TEST(AudioSynth, TrainingQueriesCycleOverRemainingDocs) {
  const auto cfg = small_config();
  auto bench = build_synthetic_benchmark(cfg, {10, 4, 2.0, 18}, nullptr, 1);
  std::map<std::string, int> uses;
  for (const auto& q : bench.train_queries) uses[bench.train_qrels.positives(q.id)[0]]++;
  EXPECT_LE(uses.size(), 6u);
  EXPECT_GE(bench.train_queries.size(), 12u);
  EXPECT_THROW(build_synthetic_benchmark(cfg, {4, 4, 2.0, 1}), ConfigError);
  EXPECT_THROW(build_synthetic_benchmark(cfg, {4, 5, 2.0, 0}), ConfigError);
}

TEST(AudioSynth, ProjectionsPreserveStructure) {
  const auto cfg = small_config();
  auto bench = build_synthetic_benchmark(cfg, {12, 4, 2.0, 0});
  for (const auto& q : bench.queries) {
    auto text = project_to_text(q);
    auto audio = project_to_audio(q, cfg);
    ASSERT_EQ(text.segments.size(), q.segments.size());
    ASSERT_EQ(audio.segments.size(), q.segments.size());
    for (std::size_t i = 0; i < q.segments.size(); ++i) {
      EXPECT_TRUE(text.segments[i].is_text());
      EXPECT_TRUE(audio.segments[i].is_audio());
      if (q.segments[i].is_audio()) {
        EXPECT_EQ(audio.segments[i], q.segments[i]);
      }
    }
    EXPECT_DOUBLE_EQ(token_jaccard(text, q), 1.0);
    EXPECT_EQ(audio, project_to_audio(q, cfg));
  }
}

TEST(AudioSynth, CustomGeneratorIsUsed) {
  struct Upper final : GeneratorClient {
    std::string expand(std::string_view text, ExpansionMode) const override { return std::string(text) + " extra"; }
  } gen;
  auto bench = build_synthetic_benchmark(small_config(), {6, 2, 1.0, 0}, &gen);
  bool seen = false;
  for (const auto& d : bench.corpus) {
    for (const auto& s : d.segments) {
      const auto words = pseudo_tokens(s.is_text() ? s.text : *s.transcript);
      seen = seen || std::find(words.begin(), words.end(), "extra") != words.end();
    }
  }
  EXPECT_TRUE(seen);
}

TEST(AudioSynth, ConfigParsingAndValidation) {
  auto cfg = parse_synth_config({{"filler_ratio", "0.7"}, {"frame_dim", "24"}, {"noise_scale.traffic", "0.3"}});
  EXPECT_DOUBLE_EQ(cfg.filler_ratio, 0.7);
  EXPECT_EQ(cfg.frame_dim, 24u);
  EXPECT_DOUBLE_EQ(cfg.noise_scale[2], 0.3);
  EXPECT_THROW(parse_synth_config({{"nope", "1"}}), ConfigError);
  EXPECT_THROW(parse_synth_config({{"filler_ratio", "abc"}}), ConfigError);
  EXPECT_THROW(parse_synth_config({{"filler_ratio", "1.0"}}), ConfigError);
  EXPECT_THROW(parse_synth_config({{"frame_dim", "2.5"}}), ConfigError);
}
