#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "atir/error.hpp"
#include "atir/selector.hpp"
#include "generators.hpp"

using namespace atir;
using namespace atir::selector;

namespace {

SelectorModel random_selector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 0.5);
  auto m = SelectorModel::zeros(dim);
  for (auto& w : m.weights) w = g(rng);
  m.bias = g(rng);
  return m;
}

FrameLabels random_labels(std::mt19937_64& rng, std::size_t n) {
  std::bernoulli_distribution b(0.5);
  FrameLabels l;
  for (std::size_t i = 0; i < n; ++i) l.labels.push_back(b(rng));
  return l;
}

}  // namespace

TEST(Selector, LabelsUseFrameMidpoints) {
  FrameMatrix f(5, 2);
  // Frame midpoints: 20, 60, 100, 140, 180 ms.
  auto seg = Segment::make_audio(f, {{30, 61}, {139, 150}});
  EXPECT_EQ(align_spans_to_labels(seg).labels, (std::vector<uint8_t>{0, 1, 0, 1, 0}));
  seg.spans = {{0, 60}};  // end is exclusive: midpoint 60 is outside
  EXPECT_EQ(align_spans_to_labels(seg).labels, (std::vector<uint8_t>{1, 0, 0, 0, 0}));
  EXPECT_THROW(align_spans_to_labels(Segment::make_text("x")), DataError);
}

TEST(Selector, UniformHalfProbabilityGivesTLn2) {
  for (std::size_t t : {1u, 7u, 50u}) {
    std::mt19937_64 rng(t);
    const auto frames = testgen::random_frames(rng, t, 4);
    const auto r = selector_loss_and_grad(SelectorModel::zeros(4), frames, random_labels(rng, t));
    EXPECT_NEAR(r.loss, double(t) * std::log(2.0), 1e-9);
  }
}

TEST(Selector, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 1 + trial % 16, n = 1 + trial % 8;
    auto model = random_selector(rng, dim);
    const auto frames = testgen::random_frames(rng, n, dim);
    const auto labels = random_labels(rng, n);
    const auto an = selector_loss_and_grad(model, frames, labels);
    auto check = [&](double& param, double analytic) {
      const double orig = param;
      param = orig + h;
      const double lp = selector_loss_and_grad(model, frames, labels).loss;
      param = orig - h;
      const double lm = selector_loss_and_grad(model, frames, labels).loss;
      param = orig;
      const double fd = (lp - lm) / (2 * h);
      EXPECT_LE(std::abs(fd - analytic), 1e-6 * std::max(1.0, std::abs(fd)));
    };
    for (std::size_t i = 0; i < dim; ++i) check(model.weights[i], an.grad_w[i]);
    check(model.bias, an.grad_b);
  }
}

TEST(Selector, FilterKeepsOrderAndHonoursMinKeep) {
  auto m = SelectorModel::zeros(1);
  m.weights = {1.0};
  FrameMatrix f(4, 1);
  f(0, 0) = -2.0f;
  f(1, 0) = 3.0f;
  f(2, 0) = -1.0f;
  f(3, 0) = 2.0f;
  auto r = filter_frames(m, f);
  EXPECT_EQ(r.kept_indices, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(r.kept.rows(), 2u);
  EXPECT_FLOAT_EQ(r.kept(0, 0), 3.0f);

  m.bias = -10.0;  // nothing passes the threshold
  m.min_keep = 2;
  EXPECT_EQ(select_frame_indices(m, f), (std::vector<std::size_t>{1, 3}));
  m.min_keep = 9;
  EXPECT_EQ(select_frame_indices(m, f).size(), 4u);
}

TEST(Selector, ValidationAndJsonRoundTrip) {
  std::mt19937_64 rng(2);
  auto m = random_selector(rng, 6);
  m.threshold = 0.4;
  m.min_keep = 3;
  EXPECT_EQ(selector_from_json(selector_to_json(m)), m);
  auto path = std::filesystem::temp_directory_path() / "atir_selector_test.json";
  save_selector(m, path);
  EXPECT_EQ(load_selector(path), m);
  m.threshold = 1.0;
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_THROW(selector_from_json("{}"), DataError);
}

TEST(Selector, LearnsSeparableFramesAndReportsF1) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> g(0.0f, 0.3f);
  std::vector<LabelledSegment> data;
  for (int s = 0; s < 40; ++s) {
    LabelledSegment seg;
    seg.labels = random_labels(rng, 10);
    seg.frames = FrameMatrix(10, 3);
    for (std::size_t r = 0; r < 10; ++r) {
      seg.frames(r, 0) = (seg.labels.labels[r] ? 1.0f : -1.0f) + g(rng);
      seg.frames(r, 1) = g(rng);
      seg.frames(r, 2) = g(rng);
    }
    data.push_back(std::move(seg));
  }
  OptimizerConfig opt;
  opt.lr_scale = 2000;
  opt.max_steps = 200;
  opt.batch_size = 8;
  auto trained = train_selector(data, opt);
  EXPECT_LE(trained.steps, 200u);
  EXPECT_FALSE(trained.holdout_curve.empty());
  const auto f1 = token_f1(trained.model, data);
  EXPECT_GT(f1.f1, 0.95);
  EXPECT_NEAR(f1.f1, 2 * f1.precision * f1.recall / (f1.precision + f1.recall), 1e-12);
}
