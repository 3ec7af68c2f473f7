#pragma once

// Frame-level informativeness scorer: a logistic layer over frame features,
// trained from timestamp annotations and used to drop redundant frames.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "atir/core.hpp"
#include "atir/optim.hpp"

namespace atir::selector {

struct SelectorModel {
  std::vector<double> weights;
  double bias = 0.0;
  /// Frames with probability strictly above this are kept. Must lie in (0, 1).
  double threshold = 0.5;
  std::size_t min_keep = 1;

  static SelectorModel zeros(std::size_t frame_dim);
  std::size_t frame_dim() const { return weights.size(); }
  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const SelectorModel&, const SelectorModel&) = default;
};

struct FrameLabels {
  std::vector<uint8_t> labels;
  std::size_t size() const { return labels.size(); }
};

/// Frame t covers [40t, 40(t+1)) ms and is labelled 1 iff its midpoint
/// 40t + 20 lies inside some span. Throws DataError for text segments.
FrameLabels align_spans_to_labels(const Segment& segment);

/// p_t = sigmoid(w . f_t + b).
std::vector<double> score_frames(const SelectorModel& model, const FrameMatrix& frames);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

/// Summed binary cross-entropy over frames and its analytic gradient.
LossAndGrad selector_loss_and_grad(const SelectorModel& model, const FrameMatrix& frames, const FrameLabels& labels);

struct LabelledSegment {
  FrameMatrix frames;
  FrameLabels labels;
};

struct SelectorTrainingResult {
  SelectorModel model;
  std::size_t steps = 0;
  std::size_t best_step = 0;
  double best_holdout_loss = 0.0;
  /// (step, mean per-frame held-out loss) at every evaluation point.
  std::vector<std::pair<std::size_t, double>> holdout_curve;
};

struct SelectorTrainingOptions {
  double holdout_fraction = 0.1;
  std::size_t eval_every = 10;
  double threshold = 0.5;
  std::size_t min_keep = 1;
};

/// Mini-batch momentum SGD on per-frame mean BCE. Returns the parameters with
/// the lowest held-out loss seen. A non-finite loss throws NumericError.
SelectorTrainingResult train_selector(const std::vector<LabelledSegment>& data, const OptimizerConfig& opt,
                                      const SelectorTrainingOptions& options = {});

struct FilterResult {
  FrameMatrix kept;
  std::vector<std::size_t> kept_indices;
};

/// Keeps frames with p_t > threshold in original order; when fewer than
/// min_keep survive, keeps the min_keep most probable frames (ties -> lower
/// index), still in original order.
FilterResult filter_frames(const SelectorModel& model, const FrameMatrix& frames);

/// Indices only; same rule as filter_frames.
std::vector<std::size_t> select_frame_indices(const SelectorModel& model, const FrameMatrix& frames);

struct TokenF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Frame-level precision/recall/F1 of p_t > threshold against labels.
TokenF1 token_f1(const SelectorModel& model, const std::vector<LabelledSegment>& data);

std::string selector_to_json(const SelectorModel& model);
SelectorModel selector_from_json(const std::string& text);
void save_selector(const SelectorModel& model, const std::filesystem::path& path);
SelectorModel load_selector(const std::filesystem::path& path);

}  // namespace atir::selector
