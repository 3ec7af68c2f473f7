#include "atir/pipeline.hpp"

#include <random>

#include "atir/error.hpp"
#include "atir/util.hpp"

namespace atir::pipeline {

using audiosynth::SynthConfig;
using training::TrainingInstance;

Corpus text_view_corpus(const Corpus& corpus) {
  Corpus out(corpus.frame_dim());
  for (const auto& d : corpus.documents()) {
    auto v = audiosynth::project_to_text(d);
    v.id += kTextViewSuffix;
    out.add(std::move(v));
  }
  return out;
}

Corpus audio_view_corpus(const Corpus& corpus, const SynthConfig& cfg) {
  Corpus out(corpus.frame_dim());
  for (const auto& d : corpus.documents()) {
    auto v = audiosynth::project_to_audio(d, cfg);
    v.id += kAudioViewSuffix;
    out.add(std::move(v));
  }
  return out;
}

std::vector<selector::LabelledSegment> selector_training_data(const Corpus& corpus,
                                                              const std::vector<InterleavedSequence>& queries) {
  std::vector<selector::LabelledSegment> out;
  auto visit = [&](const InterleavedSequence& seq) {
    for (const auto& s : seq.segments) {
      if (s.is_audio()) out.push_back({s.frames, selector::align_spans_to_labels(s)});
    }
  };
  for (const auto& d : corpus.documents()) visit(d);
  for (const auto& q : queries) visit(q);
  return out;
}

namespace {

Segment as_text(const Segment& s) {
  if (s.is_text()) return s;
  if (!s.transcript) throw DataError("stage I pairs: audio segment without transcript");
  return Segment::make_text(*s.transcript);
}

Segment as_audio(const Segment& s, const SynthConfig& cfg, const std::string& id, std::size_t index) {
  if (s.is_audio()) return s;
  return audiosynth::featurize_text_as_audio(s.text, audiosynth::environment_for(cfg, id, index), cfg,
                                             mix_seed(fnv1a64(id), index));
}

}  // namespace

Stage1Data build_stage1_pairs(const Corpus& corpus, const SynthConfig& cfg, std::size_t pairs_per_doc,
                              uint64_t seed) {
  Stage1Data out;
  out.corpus = Corpus(corpus.frame_dim());
  const auto& docs = corpus.documents();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto& doc = docs[i];
    const std::size_t n = doc.segments.size();
    std::mt19937_64 rng(mix_seed(seed, i));
    const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t k = 0; k < pairs_per_doc; ++k) {
      // k walks pair types first, then passages, so the first 4n pairs are distinct.
      const std::size_t type = k % 4;
      const std::size_t p = (offset + k / 4) % n;
      std::size_t q = p;
      // Different-passage pairs fall back to the same passage for
      // single-segment documents.
      if ((type == 0 || type == 3) && n > 1) {
        q = (p + 1 + std::uniform_int_distribution<std::size_t>(0, n - 2)(rng)) % n;
      }
      const std::string pid = "s1:" + doc.id + ":" + std::to_string(k);
      InterleavedSequence query{"s1q:" + doc.id + ":" + std::to_string(k), {}};
      InterleavedSequence positive{pid, {}};
      switch (type) {
        case 0:
          query.segments.push_back(as_text(doc.segments[p]));
          positive.segments.push_back(as_text(doc.segments[q]));
          break;
        case 1:
          query.segments.push_back(as_audio(doc.segments[p], cfg, doc.id, p));
          positive.segments.push_back(as_text(doc.segments[p]));
          break;
        case 2:
          query.segments.push_back(as_text(doc.segments[p]));
          positive.segments.push_back(as_audio(doc.segments[p], cfg, doc.id, p));
          break;
        default:
          query.segments.push_back(as_audio(doc.segments[p], cfg, doc.id, p));
          positive.segments.push_back(as_audio(doc.segments[q], cfg, doc.id, q));
          break;
      }
      out.corpus.add(std::move(positive));
      out.instances.push_back({std::move(query), pid, {}});
    }
  }
  return out;
}

void PipelineConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("model.tau must be positive");
  selector_opt.validate();
  stage1_opt.validate();
  stage2_opt.validate();
  mining.validate();
  if (stage1_pairs_per_doc == 0) throw ConfigError("stage1.pairs_per_doc must be positive");
  if (workers == 0) throw ConfigError("workers must be positive");
}

PipelineResult train_pipeline(const audiosynth::SyntheticBenchmark& bench, const PipelineConfig& cfg,
                              const selector::SelectorModel* pretrained_selector) {
  cfg.validate();
  auto dims = cfg.dims;
  dims.frame_dim = bench.config.frame_dim;
  auto model = encoder::RetrieverModel::initialize(dims, cfg.model_seed, cfg.tau);

  PipelineResult result;
  if (cfg.use_selector && pretrained_selector) {
    if (pretrained_selector->frame_dim() != dims.frame_dim) {
      throw ConfigError("train_pipeline: selector frame_dim does not match the benchmark");
    }
    model.selector = *pretrained_selector;
  } else if (cfg.use_selector) {
    const auto data = selector_training_data(bench.corpus, bench.train_queries);
    auto trained = selector::train_selector(data, cfg.selector_opt, cfg.selector_options);
    model.selector = trained.model;
    result.selector_steps = trained.steps;
  }
  const auto front_end = cfg.front_end();
  training::TrainOptions options{front_end, cfg.joint_selector && cfg.use_selector, cfg.workers};

  const auto text_view = text_view_corpus(bench.corpus);
  const auto audio_view = audio_view_corpus(bench.corpus, bench.config);
  Corpus stage2_corpus(bench.corpus.frame_dim());
  for (const auto& d : text_view.documents()) stage2_corpus.add(d);
  for (const auto& d : audio_view.documents()) stage2_corpus.add(d);

  // Stage II queries need at least two segments.
  std::vector<InterleavedSequence> text_q, audio_q;
  Qrels text_qrels, audio_qrels;
  std::size_t kept = 0;
  for (const auto& q : bench.train_queries) {
    if (q.segments.size() < 2) continue;
    const bool to_text = kept++ % 2 == 0;
    for (const auto& pos : bench.train_qrels.positives(q.id)) {
      (to_text ? text_qrels : audio_qrels).set(q.id, pos + (to_text ? kTextViewSuffix : kAudioViewSuffix), 1);
    }
    (to_text ? text_q : audio_q).push_back(q);
  }

  training::StagePlan plan;
  if (cfg.run_stage1) {
    auto s1 = build_stage1_pairs(bench.corpus, bench.config, cfg.stage1_pairs_per_doc, cfg.stage1_opt.seed);
    plan.stage1_data = std::move(s1.instances);
    plan.stage1_corpus = std::move(s1.corpus);
  }
  plan.stage1_opt = cfg.stage1_opt;
  plan.stage2_opt = cfg.stage2_opt;
  plan.skip_stage1 = !cfg.run_stage1;
  plan.skip_stage2 = !cfg.run_stage2;

  mining::MiningStats stats;
  auto mine = [&](const encoder::RetrieverModel& m) {
    auto a = mining::mine_for_dataset(m, text_view, text_q, text_qrels, cfg.mining, front_end, cfg.workers);
    auto b = mining::mine_for_dataset(m, audio_view, audio_q, audio_qrels, cfg.mining, front_end, cfg.workers);
    const double na = static_cast<double>(a.stats.queries);
    const double nb = static_cast<double>(b.stats.queries);
    const double n = na + nb;
    stats.queries = a.stats.queries + b.stats.queries;
    stats.positive_not_found = a.stats.positive_not_found + b.stats.positive_not_found;
    if (n > 0) {
      stats.mean_hard_negatives = (a.stats.mean_hard_negatives * na + b.stats.mean_hard_negatives * nb) / n;
      stats.false_negative_rate = (a.stats.false_negative_rate * na + b.stats.false_negative_rate * nb) / n;
      stats.mean_false_negatives = (a.stats.mean_false_negatives * na + b.stats.mean_false_negatives * nb) / n;
    }
    // Interleave the two halves back into training-query order.
    std::vector<TrainingInstance> merged;
    std::size_t ia = 0, ib = 0;
    while (ia < a.instances.size() || ib < b.instances.size()) {
      if (ia < a.instances.size()) merged.push_back(std::move(a.instances[ia++]));
      if (ib < b.instances.size()) merged.push_back(std::move(b.instances[ib++]));
    }
    return merged;
  };

  auto two = training::run_two_stage(model, plan, stage2_corpus, options, mine);
  result.stage1 = std::move(two.stage1);
  result.model = std::move(two.stage2);
  result.curve = std::move(two.curve);
  result.stage2_data = std::move(two.stage2_data);
  result.mining_stats = stats;
  return result;
}

}  // namespace atir::pipeline
