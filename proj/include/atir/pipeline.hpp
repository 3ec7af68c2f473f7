#pragma once

// End-to-end training recipe on a synthetic benchmark: selector first, then
// Stage I weak pairs, mining with the Stage I model, and Stage II.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "atir/audiosynth.hpp"
#include "atir/encoder.hpp"
#include "atir/mining.hpp"
#include "atir/optim.hpp"
#include "atir/selector.hpp"
#include "atir/training.hpp"

namespace atir::pipeline {

/// Id suffixes of the two single-modality views of a document.
inline constexpr const char* kTextViewSuffix = "#text";
inline constexpr const char* kAudioViewSuffix = "#audio";

/// Text view and audio view of every document, ids suffixed.
Corpus text_view_corpus(const Corpus& corpus);
Corpus audio_view_corpus(const Corpus& corpus, const audiosynth::SynthConfig& cfg);

/// Every audio segment of the corpus and the given queries, with span labels.
std::vector<selector::LabelledSegment> selector_training_data(const Corpus& corpus,
                                                              const std::vector<InterleavedSequence>& queries);

struct Stage1Data {
  std::vector<training::TrainingInstance> instances;
  Corpus corpus;
};

/// Single-segment pairs cut from corpus documents. Pair types rotate over
/// text->text (different passages), audio->text and text->audio (same
/// passage), and audio->audio (different passages).
Stage1Data build_stage1_pairs(const Corpus& corpus, const audiosynth::SynthConfig& cfg, std::size_t pairs_per_doc,
                              uint64_t seed);

struct PipelineConfig {
  encoder::ModelDims dims;
  uint64_t model_seed = 11;
  double tau = 0.05;
  OptimizerConfig selector_opt;
  selector::SelectorTrainingOptions selector_options;
  OptimizerConfig stage1_opt;
  OptimizerConfig stage2_opt;
  mining::MiningConfig mining;
  std::size_t stage1_pairs_per_doc = 1;
  bool use_selector = true;
  bool run_stage1 = true;
  bool run_stage2 = true;
  bool joint_selector = false;
  std::size_t workers = 1;

  void validate() const;
  encoder::AudioFrontEnd front_end() const {
    return use_selector ? encoder::AudioFrontEnd::selector() : encoder::AudioFrontEnd::all_frames();
  }
};

struct PipelineResult {
  encoder::RetrieverModel stage1;
  encoder::RetrieverModel model;
  std::size_t selector_steps = 0;
  std::vector<training::LossRecord> curve;
  std::vector<training::TrainingInstance> stage2_data;
  mining::MiningStats mining_stats;
};

/// Stage II training queries alternate between the text view (even index)
/// and the audio view (odd index) of their positive; each view is mined
/// against its own corpus. A pretrained selector, when given, replaces the
/// selector training step.
PipelineResult train_pipeline(const audiosynth::SyntheticBenchmark& bench, const PipelineConfig& cfg,
                              const selector::SelectorModel* pretrained_selector = nullptr);

}  // namespace atir::pipeline
