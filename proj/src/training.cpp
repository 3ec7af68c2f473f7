#include "atir/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "atir/error.hpp"
#include "atir/selector.hpp"
#include "atir/util.hpp"

namespace atir::training {

using encoder::EncodeTrace;
using encoder::Gradients;
using encoder::RetrieverModel;

void validate_instance(const TrainingInstance& inst, const Corpus& corpus) {
  if (!corpus.contains(inst.positive)) {
    throw DataError("training instance '" + inst.query.id + "': unknown positive '" + inst.positive + "'");
  }
  for (const auto& n : inst.hard_negatives) {
    if (n == inst.positive) {
      throw DataError("training instance '" + inst.query.id + "': positive listed as hard negative");
    }
    if (!corpus.contains(n)) {
      throw DataError("training instance '" + inst.query.id + "': unknown hard negative '" + n + "'");
    }
  }
}

double infonce_from_scores(double positive_score, std::span<const double> negative_scores, double tau) {
  double mx = positive_score / tau;
  for (double s : negative_scores) mx = std::max(mx, s / tau);
  double sum = std::exp(positive_score / tau - mx);
  for (double s : negative_scores) sum += std::exp(s / tau - mx);
  return -(positive_score / tau - mx) + std::log(sum);
}

namespace {

struct BatchForward {
  std::vector<EncodeTrace> queries;
  std::vector<std::string> doc_ids;
  std::vector<EncodeTrace> docs;
  // candidates[i][0] is the positive; indices into doc_ids
  std::vector<std::vector<std::size_t>> candidates;
};

BatchForward forward(const RetrieverModel& model, const std::vector<TrainingInstance>& batch, const Corpus& corpus,
                     const TrainOptions& options) {
  if (batch.empty()) throw DataError("infonce: empty batch");
  BatchForward fw;
  std::unordered_map<std::string, std::size_t> slot;
  auto intern = [&](const std::string& id) {
    auto [it, inserted] = slot.emplace(id, fw.doc_ids.size());
    if (inserted) fw.doc_ids.push_back(id);
    return it->second;
  };
  std::set<std::string> positives;
  for (const auto& inst : batch) {
    validate_instance(inst, corpus);
    if (!positives.insert(inst.positive).second) {
      throw DataError("infonce: duplicate positive '" + inst.positive + "' in batch");
    }
  }
  std::vector<std::size_t> positive_slot(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    positive_slot[i] = intern(batch[i].positive);
    for (const auto& n : batch[i].hard_negatives) intern(n);
  }
  fw.candidates.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& cand = fw.candidates[i];
    cand.push_back(positive_slot[i]);
    std::set<std::size_t> seen = {positive_slot[i]};
    for (const auto& n : batch[i].hard_negatives) {
      const auto s = slot.at(n);
      if (seen.insert(s).second) cand.push_back(s);
    }
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (j != i && seen.insert(positive_slot[j]).second) cand.push_back(positive_slot[j]);
    }
  }
  fw.queries.resize(batch.size());
  fw.docs.resize(fw.doc_ids.size());
  parallel_for(batch.size() + fw.doc_ids.size(), options.workers, [&](std::size_t k) {
    if (k < batch.size()) {
      fw.queries[k] = encoder::encode_with_trace(model, batch[k].query, options.front_end);
    } else {
      const auto d = k - batch.size();
      fw.docs[d] = encoder::encode_with_trace(model, corpus.at(fw.doc_ids[d]), options.front_end);
    }
  });
  return fw;
}

// Returns the mean loss and fills d(loss)/d(score) per candidate.
double score_and_dscores(const BatchForward& fw, double tau, std::vector<std::vector<double>>* dscores) {
  const double inv_b = 1.0 / static_cast<double>(fw.queries.size());
  double total = 0.0;
  if (dscores) dscores->resize(fw.queries.size());
  std::vector<double> logits;
  for (std::size_t i = 0; i < fw.queries.size(); ++i) {
    const auto& cand = fw.candidates[i];
    logits.resize(cand.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cand.size(); ++c) {
      logits[c] = dot(fw.queries[i].embedding, fw.docs[cand[c]].embedding) / tau;
      mx = std::max(mx, logits[c]);
    }
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    total += lse - logits[0];
    if (dscores) {
      auto& ds = (*dscores)[i];
      ds.resize(cand.size());
      for (std::size_t c = 0; c < cand.size(); ++c) {
        const double p = std::exp(logits[c] - lse);
        ds[c] = (p - (c == 0 ? 1.0 : 0.0)) / tau * inv_b;
      }
    }
  }
  return total * inv_b;
}

}  // namespace

double infonce_loss(const RetrieverModel& model, const std::vector<TrainingInstance>& batch, const Corpus& corpus,
                    const TrainOptions& options) {
  const auto fw = forward(model, batch, corpus, options);
  return score_and_dscores(fw, model.tau, nullptr);
}

LossAndGradients infonce_loss_and_grad(const RetrieverModel& model, const std::vector<TrainingInstance>& batch,
                                       const Corpus& corpus, const TrainOptions& options) {
  const auto fw = forward(model, batch, corpus, options);
  std::vector<std::vector<double>> dscores;
  LossAndGradients out;
  out.loss = score_and_dscores(fw, model.tau, &dscores);
  out.grads = Gradients::zeros_like(model);

  const std::size_t d_out = model.dims.d_out;
  std::vector<std::vector<double>> dq(fw.queries.size(), std::vector<double>(d_out, 0.0));
  std::vector<std::vector<double>> dd(fw.docs.size(), std::vector<double>(d_out, 0.0));
  for (std::size_t i = 0; i < fw.queries.size(); ++i) {
    const auto& cand = fw.candidates[i];
    const auto& q = fw.queries[i].embedding;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const double g = dscores[i][c];
      const auto& d = fw.docs[cand[c]].embedding;
      for (std::size_t b = 0; b < d_out; ++b) {
        dq[i][b] += g * d[b];
        dd[cand[c]][b] += g * q[b];
      }
    }
  }
  // Fixed reduction order: queries, then documents by first appearance.
  for (std::size_t i = 0; i < fw.queries.size(); ++i) encoder::backprop_embedding(model, fw.queries[i], dq[i], out.grads);
  for (std::size_t k = 0; k < fw.docs.size(); ++k) encoder::backprop_embedding(model, fw.docs[k], dd[k], out.grads);
  return out;
}

std::vector<std::vector<std::size_t>> plan_batches(const std::vector<TrainingInstance>& data, std::size_t batch_size,
                                                   std::size_t epochs, uint64_t seed) {
  std::vector<std::vector<std::size_t>> batches;
  if (data.empty() || batch_size == 0) return batches;
  std::vector<std::size_t> order(data.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(seed, e));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> pending(order.begin(), order.end());
    while (!pending.empty()) {
      std::vector<std::size_t> batch;
      std::vector<std::size_t> deferred;
      std::set<std::string> used;
      for (auto idx : pending) {
        if (batch.size() < batch_size && used.insert(data[idx].positive).second) {
          batch.push_back(idx);
        } else {
          deferred.push_back(idx);
        }
      }
      batches.push_back(std::move(batch));
      pending = std::move(deferred);
      // Only the first batch_size accepted; the rest roll into later batches
      // in their shuffled order.
    }
  }
  return batches;
}

namespace {

void selector_step(encoder::RetrieverModel& model, const std::vector<TrainingInstance>& batch, const Corpus& corpus,
                   MomentumSgd& sgd, double lr) {
  const std::size_t dim = model.selector.frame_dim();
  std::vector<double> grad(dim + 1, 0.0);
  std::size_t frames = 0;
  auto visit = [&](const InterleavedSequence& seq) {
    for (const auto& s : seq.segments) {
      if (!s.is_audio()) continue;
      const auto lg = selector::selector_loss_and_grad(model.selector, s.frames, selector::align_spans_to_labels(s));
      for (std::size_t i = 0; i < dim; ++i) grad[i] += lg.grad_w[i];
      grad[dim] += lg.grad_b;
      frames += s.num_frames();
    }
  };
  for (const auto& inst : batch) {
    visit(inst.query);
    visit(corpus.at(inst.positive));
  }
  if (frames == 0) return;
  for (auto& g : grad) g /= static_cast<double>(frames);
  std::vector<double> params(model.selector.weights);
  params.push_back(model.selector.bias);
  sgd.step(params, grad, lr);
  std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(dim), model.selector.weights.begin());
  model.selector.bias = params[dim];
}

}  // namespace

StageResult train_stage(const RetrieverModel& model, const std::vector<TrainingInstance>& data,
                        const OptimizerConfig& opt, const Corpus& corpus, const std::string& stage_name,
                        const TrainOptions& options) {
  opt.validate();
  StageResult result{model, {}};
  if (data.empty()) return result;
  for (const auto& inst : data) validate_instance(inst, corpus);

  auto batches = plan_batches(data, opt.batch_size, opt.epochs, opt.seed);
  if (opt.max_steps != 0 && batches.size() > opt.max_steps) batches.resize(opt.max_steps);
  const std::size_t total = batches.size();

  auto& m = result.model;
  RowSparseMomentum text_sgd(m.text_table.rows(), m.text_table.cols(), opt.momentum);
  MomentumSgd audio_sgd(m.audio_proj.data().size(), opt.momentum);
  MomentumSgd fusion_sgd(m.fusion.data().size(), opt.momentum);
  MomentumSgd selector_sgd(m.selector.frame_dim() + 1, opt.momentum);

  std::vector<TrainingInstance> batch;
  for (std::size_t step = 0; step < total; ++step) {
    batch.clear();
    for (auto idx : batches[step]) batch.push_back(data[idx]);
    LossAndGradients lg;
    try {
      lg = infonce_loss_and_grad(m, batch, corpus, options);
    } catch (const NumericError& e) {
      throw NumericError("train_stage(" + stage_name + "): step " + std::to_string(step) + ": " + e.what());
    }
    if (!std::isfinite(lg.loss)) {
      throw NumericError("train_stage(" + stage_name + "): non-finite loss at step " + std::to_string(step));
    }
    const double lr = learning_rate_at(opt, step, total);
    text_sgd.step(m.text_table, lg.grads.text_rows, lr * opt.text_rate_mult);
    audio_sgd.step(m.audio_proj.data(), lg.grads.audio_proj.data(), lr * opt.audio_rate_mult);
    fusion_sgd.step(m.fusion.data(), lg.grads.fusion.data(), lr * opt.fusion_rate_mult);
    if (options.joint_selector) selector_step(m, batch, corpus, selector_sgd, lr);
    result.curve.push_back({step, stage_name, lg.loss, lr});
  }
  text_sgd.flush(m.text_table);
  return result;
}

void StagePlan::validate() const {
  for (const auto& inst : stage1_data) {
    if (inst.query.segments.size() > 1) {
      throw DataError("stage plan: stage I query '" + inst.query.id + "' has more than one segment");
    }
    const auto* doc = stage1_corpus.find(inst.positive);
    if (doc && doc->segments.size() > 1) {
      throw DataError("stage plan: stage I document '" + inst.positive + "' has more than one segment");
    }
  }
  for (const auto& inst : stage2_data) {
    if (inst.query.segments.size() < 2) {
      throw DataError("stage plan: stage II query '" + inst.query.id + "' is not interleaved");
    }
  }
}

TwoStageResult run_two_stage(const RetrieverModel& model, const StagePlan& plan, const Corpus& corpus,
                             const TrainOptions& options, const Stage2Builder& build_stage2) {
  plan.validate();
  TwoStageResult out{model, model, {}, {}};
  if (!plan.skip_stage1) {
    auto s1 = train_stage(model, plan.stage1_data, plan.stage1_opt, plan.stage1_corpus, "stage1", options);
    out.stage1 = std::move(s1.model);
    out.curve = std::move(s1.curve);
  }
  out.stage2 = out.stage1;
  if (plan.skip_stage2) return out;
  out.stage2_data = build_stage2 ? build_stage2(out.stage1) : plan.stage2_data;
  for (const auto& inst : out.stage2_data) {
    if (inst.query.segments.size() < 2) {
      throw DataError("stage plan: stage II query '" + inst.query.id + "' is not interleaved");
    }
  }
  auto s2 = train_stage(out.stage1, out.stage2_data, plan.stage2_opt, corpus, "stage2", options);
  out.stage2 = std::move(s2.model);
  out.curve.insert(out.curve.end(), s2.curve.begin(), s2.curve.end());
  return out;
}

void write_loss_curve(const std::vector<LossRecord>& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "step,stage,loss,lr\n";
  for (const auto& r : curve) {
    out << r.step << ',' << r.stage << ',' << format_real(r.loss, 17) << ',' << format_real(r.lr, 17) << '\n';
  }
  if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
}

}  // namespace atir::training
