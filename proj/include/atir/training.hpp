#pragma once

// Contrastive (InfoNCE) objective with hand-derived gradients, the stage
// trainer, and the two-stage schedule.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "atir/core.hpp"
#include "atir/encoder.hpp"
#include "atir/optim.hpp"

namespace atir::training {

struct TrainingInstance {
  InterleavedSequence query;
  std::string positive;
  std::vector<std::string> hard_negatives;
};

/// Throws DataError when the positive is listed as a hard negative or any id
/// does not resolve in the corpus.
void validate_instance(const TrainingInstance& inst, const Corpus& corpus);

struct TrainOptions {
  encoder::AudioFrontEnd front_end = encoder::AudioFrontEnd::selector();
  /// Also take BCE steps on the selector from the batch's span annotations.
  bool joint_selector = false;
  std::size_t workers = 1;
};

/// -log softmax of the positive among {positive} + negatives at temperature tau,
/// evaluated with max subtraction.
double infonce_from_scores(double positive_score, std::span<const double> negative_scores, double tau);

/// Mean over the batch of the per-instance InfoNCE loss. Negatives for an
/// instance are its hard negatives plus every other instance's positive.
double infonce_loss(const encoder::RetrieverModel& model, const std::vector<TrainingInstance>& batch,
                    const Corpus& corpus, const TrainOptions& options = {});

struct LossAndGradients {
  double loss = 0.0;
  encoder::Gradients grads;
};

LossAndGradients infonce_loss_and_grad(const encoder::RetrieverModel& model,
                                       const std::vector<TrainingInstance>& batch, const Corpus& corpus,
                                       const TrainOptions& options = {});

inline encoder::Gradients infonce_grad(const encoder::RetrieverModel& model, const std::vector<TrainingInstance>& batch,
                                       const Corpus& corpus, const TrainOptions& options = {}) {
  return infonce_loss_and_grad(model, batch, corpus, options).grads;
}

struct LossRecord {
  std::size_t step = 0;
  std::string stage;
  double loss = 0.0;
  double lr = 0.0;
};

struct StageResult {
  encoder::RetrieverModel model;
  std::vector<LossRecord> curve;
};

/// Splits shuffled instances into batches with mutually distinct positives;
/// a conflicting instance moves to the next batch. Deterministic in `seed`.
std::vector<std::vector<std::size_t>> plan_batches(const std::vector<TrainingInstance>& data, std::size_t batch_size,
                                                   std::size_t epochs, uint64_t seed);

/// Momentum SGD with linear warm-up over the planned batches. A non-finite
/// loss throws NumericError naming the step.
StageResult train_stage(const encoder::RetrieverModel& model, const std::vector<TrainingInstance>& data,
                        const OptimizerConfig& opt, const Corpus& corpus, const std::string& stage_name,
                        const TrainOptions& options = {});

struct StagePlan {
  std::vector<TrainingInstance> stage1_data;
  Corpus stage1_corpus;
  std::vector<TrainingInstance> stage2_data;
  OptimizerConfig stage1_opt;
  OptimizerConfig stage2_opt;
  bool skip_stage1 = false;
  bool skip_stage2 = false;

  /// Stage I sides have at most one segment; Stage II queries at least two.
  void validate() const;
};

/// Produces Stage II data once the Stage I model exists (e.g. by mining).
using Stage2Builder = std::function<std::vector<TrainingInstance>(const encoder::RetrieverModel&)>;

struct TwoStageResult {
  encoder::RetrieverModel stage1;
  encoder::RetrieverModel stage2;
  std::vector<LossRecord> curve;
  std::vector<TrainingInstance> stage2_data;
};

/// Stage II starts from the Stage I checkpoint. `corpus` resolves Stage II
/// ids; when `build_stage2` is set it replaces plan.stage2_data.
TwoStageResult run_two_stage(const encoder::RetrieverModel& model, const StagePlan& plan, const Corpus& corpus,
                             const TrainOptions& options = {}, const Stage2Builder& build_stage2 = {});

/// CSV `step,stage,loss,lr`.
void write_loss_curve(const std::vector<LossRecord>& curve, const std::filesystem::path& path);

}  // namespace atir::training
