#pragma once

// Hard-negative mining from first-stage ranks with false-negative filtering.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "atir/core.hpp"
#include "atir/encoder.hpp"
#include "atir/training.hpp"

namespace atir::mining {

struct MiningConfig {
  std::size_t top_k_pool = 50;
  std::size_t max_hard_negatives = 7;
  bool require_positive_found = true;

  /// Throws ConfigError.
  void validate() const;
};

struct MiningResult {
  std::vector<std::string> hard;
  std::vector<std::string> false_negatives;
  /// False when the positive is absent from the run.
  bool positive_found = true;
};

/// Docs strictly above the positive are false negatives; up to
/// max_hard_negatives docs strictly below it within ranks 1..top_k_pool are
/// hard negatives, in rank order. A positive missing from the run gives no
/// hard negatives when require_positive_found, otherwise the pool's leading
/// docs.
MiningResult mine_hard_negatives(const RankedList& run, const std::string& positive, const MiningConfig& cfg);

/// Multi-positive form: the highest-ranked of `positives` anchors the rule and
/// the remaining positives are left out of both outputs.
MiningResult mine_hard_negatives(const RankedList& run, const std::vector<std::string>& positives,
                                 const MiningConfig& cfg);

struct MiningStats {
  std::size_t queries = 0;
  double mean_hard_negatives = 0.0;
  /// Fraction of queries with at least one false negative.
  double false_negative_rate = 0.0;
  double mean_false_negatives = 0.0;
  std::size_t positive_not_found = 0;
};

struct MinedDataset {
  std::vector<training::TrainingInstance> instances;
  std::vector<std::vector<std::string>> false_negatives;  // parallel to instances
  MiningStats stats;
};

/// Retrieves top_k_pool documents per query with `model` and mines each one.
/// Every query must have a positive in `qrels`.
MinedDataset mine_for_dataset(const encoder::RetrieverModel& model, const Corpus& corpus,
                              const std::vector<InterleavedSequence>& queries, const Qrels& qrels,
                              const MiningConfig& cfg, const encoder::AudioFrontEnd& front_end,
                              std::size_t workers = 1);

/// JSONL lines {"hard_negatives":[...],"positive":...,"qid":...}.
void write_mined(const std::vector<training::TrainingInstance>& instances, const std::filesystem::path& path);
std::string stats_to_json(const MiningStats& stats);

}  // namespace atir::mining
