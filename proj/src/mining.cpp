#include "atir/mining.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "atir/error.hpp"
#include "atir/retrieval.hpp"

namespace atir::mining {

void MiningConfig::validate() const {
  if (top_k_pool == 0) throw ConfigError("mining.top_k_pool must be positive");
  if (max_hard_negatives == 0) throw ConfigError("mining.max_hard_negatives must be positive");
  if (max_hard_negatives > top_k_pool) throw ConfigError("mining.max_hard_negatives exceeds mining.top_k_pool");
}

MiningResult mine_hard_negatives(const RankedList& run, const std::string& positive, const MiningConfig& cfg) {
  return mine_hard_negatives(run, std::vector<std::string>{positive}, cfg);
}

MiningResult mine_hard_negatives(const RankedList& run, const std::vector<std::string>& positives,
                                 const MiningConfig& cfg) {
  cfg.validate();
  if (positives.empty()) throw DataError("mine_hard_negatives: no positive given");
  // Re-validates the ordering invariant.
  (void)RankedList::from_sorted(run.query_id(), run.entries());

  const std::set<std::string> pos(positives.begin(), positives.end());
  const auto& entries = run.entries();
  const std::size_t pool = std::min(cfg.top_k_pool, entries.size());
  std::size_t anchor = entries.size();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (pos.count(entries[i].doc_id)) {
      anchor = i;
      break;
    }
  }

  MiningResult r;
  if (anchor == entries.size()) {
    r.positive_found = false;
    if (cfg.require_positive_found) return r;
    for (std::size_t i = 0; i < pool && r.hard.size() < cfg.max_hard_negatives; ++i) {
      r.hard.push_back(entries[i].doc_id);
    }
    return r;
  }
  for (std::size_t i = 0; i < anchor; ++i) r.false_negatives.push_back(entries[i].doc_id);
  for (std::size_t i = anchor + 1; i < pool && r.hard.size() < cfg.max_hard_negatives; ++i) {
    if (!pos.count(entries[i].doc_id)) r.hard.push_back(entries[i].doc_id);
  }
  return r;
}

MinedDataset mine_for_dataset(const encoder::RetrieverModel& model, const Corpus& corpus,
                              const std::vector<InterleavedSequence>& queries, const Qrels& qrels,
                              const MiningConfig& cfg, const encoder::AudioFrontEnd& front_end,
                              std::size_t workers) {
  cfg.validate();
  const auto index = retrieval::build_index(model, corpus, front_end, workers);
  const auto qemb = retrieval::encode_queries(model, queries, front_end, workers);
  const auto runs = retrieval::batch_search(index, qemb, cfg.top_k_pool, workers);

  MinedDataset out;
  std::size_t total_hard = 0;
  std::size_t total_fn = 0;
  std::size_t with_fn = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto positives = qrels.positives(queries[i].id);
    if (positives.empty()) throw DataError("mine_for_dataset: query '" + queries[i].id + "' has no positive");
    const auto r = mine_hard_negatives(runs[i], positives, cfg);
    // Train on the anchoring positive; the lowest id when none was retrieved.
    std::string positive = positives.front();
    if (r.positive_found) {
      for (const auto& e : runs[i].entries()) {
        if (std::find(positives.begin(), positives.end(), e.doc_id) != positives.end()) {
          positive = e.doc_id;
          break;
        }
      }
    } else {
      ++out.stats.positive_not_found;
    }
    total_hard += r.hard.size();
    total_fn += r.false_negatives.size();
    if (!r.false_negatives.empty()) ++with_fn;
    out.instances.push_back({queries[i], positive, r.hard});
    out.false_negatives.push_back(r.false_negatives);
  }
  const double n = static_cast<double>(queries.size());
  out.stats.queries = queries.size();
  if (!queries.empty()) {
    out.stats.mean_hard_negatives = static_cast<double>(total_hard) / n;
    out.stats.false_negative_rate = static_cast<double>(with_fn) / n;
    out.stats.mean_false_negatives = static_cast<double>(total_fn) / n;
  }
  return out;
}

void write_mined(const std::vector<training::TrainingInstance>& instances, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  for (const auto& inst : instances) {
    nlohmann::json j;
    j["qid"] = inst.query.id;
    j["positive"] = inst.positive;
    j["hard_negatives"] = inst.hard_negatives;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
}

std::string stats_to_json(const MiningStats& stats) {
  nlohmann::json j;
  j["queries"] = stats.queries;
  j["mean_hard_negatives"] = stats.mean_hard_negatives;
  j["false_negative_rate"] = stats.false_negative_rate;
  j["mean_false_negatives"] = stats.mean_false_negatives;
  j["positive_not_found"] = stats.positive_not_found;
  return j.dump(2);
}

}  // namespace atir::mining
