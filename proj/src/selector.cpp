#include "atir/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "atir/error.hpp"
#include "atir/util.hpp"
#include "json.hpp"

namespace atir::selector {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logit(const SelectorModel& m, std::span<const float> frame) {
  double z = m.bias;
  for (std::size_t i = 0; i < frame.size(); ++i) z += m.weights[i] * static_cast<double>(frame[i]);
  return z;
}

void check_dim(const SelectorModel& m, const FrameMatrix& frames) {
  if (frames.cols() != m.frame_dim()) {
    throw DataError("selector: frame_dim " + std::to_string(frames.cols()) + " != model frame_dim " +
                    std::to_string(m.frame_dim()));
  }
}

}  // namespace

SelectorModel SelectorModel::zeros(std::size_t frame_dim) {
  SelectorModel m;
  m.weights.assign(frame_dim, 0.0);
  return m;
}

void SelectorModel::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("selector: threshold must lie strictly inside (0, 1)");
  if (min_keep == 0) throw ConfigError("selector: min_keep must be positive");
  if (weights.empty()) throw ConfigError("selector: empty weight vector");
}

FrameLabels align_spans_to_labels(const Segment& segment) {
  if (!segment.is_audio()) throw DataError("align_spans_to_labels: not an audio segment");
  FrameLabels out;
  out.labels.assign(segment.num_frames(), 0);
  for (std::size_t t = 0; t < out.labels.size(); ++t) {
    const int64_t mid = static_cast<int64_t>(t) * kFrameMs + kFrameMs / 2;
    for (const auto& sp : segment.spans) {
      if (mid >= sp.start_ms && mid < sp.end_ms) {
        out.labels[t] = 1;
        break;
      }
    }
  }
  return out;
}

std::vector<double> score_frames(const SelectorModel& model, const FrameMatrix& frames) {
  check_dim(model, frames);
  std::vector<double> p(frames.rows());
  for (std::size_t t = 0; t < frames.rows(); ++t) p[t] = sigmoid(logit(model, frames.row(t)));
  return p;
}

LossAndGrad selector_loss_and_grad(const SelectorModel& model, const FrameMatrix& frames, const FrameLabels& labels) {
  check_dim(model, frames);
  if (labels.size() != frames.rows()) {
    throw DataError("selector: label count " + std::to_string(labels.size()) + " != frame count " +
                    std::to_string(frames.rows()));
  }
  LossAndGrad out;
  out.grad_w.assign(model.frame_dim(), 0.0);
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    const auto row = frames.row(t);
    const double z = logit(model, row);
    const double y = labels.labels[t];
    // -[y log p + (1-y) log(1-p)] = softplus(z) - y z
    out.loss += softplus(z) - y * z;
    const double dz = sigmoid(z) - y;
    for (std::size_t i = 0; i < row.size(); ++i) out.grad_w[i] += dz * static_cast<double>(row[i]);
    out.grad_b += dz;
  }
  return out;
}

SelectorTrainingResult train_selector(const std::vector<LabelledSegment>& data, const OptimizerConfig& opt,
                                      const SelectorTrainingOptions& options) {
  if (data.empty()) throw DataError("train_selector: no training data");
  opt.validate();
  const std::size_t dim = data.front().frames.cols();
  for (const auto& d : data) {
    if (d.frames.cols() != dim) throw DataError("train_selector: inconsistent frame_dim");
    if (d.labels.size() != d.frames.rows()) throw DataError("train_selector: label/frame count mismatch");
  }

  SelectorModel model = SelectorModel::zeros(dim);
  model.threshold = options.threshold;
  model.min_keep = options.min_keep;
  model.validate();

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_holdout = static_cast<std::size_t>(std::floor(options.holdout_fraction * data.size()));
  if (data.size() >= 2) n_holdout = std::clamp<std::size_t>(n_holdout, 1, data.size() - 1);
  else n_holdout = 0;
  std::vector<std::size_t> holdout(order.begin(), order.begin() + n_holdout);
  std::vector<std::size_t> train(order.begin() + n_holdout, order.end());
  if (holdout.empty()) holdout = train;

  auto holdout_loss = [&](const SelectorModel& m) {
    double loss = 0.0;
    std::size_t frames = 0;
    for (auto i : holdout) {
      loss += selector_loss_and_grad(m, data[i].frames, data[i].labels).loss;
      frames += data[i].frames.rows();
    }
    return loss / static_cast<double>(std::max<std::size_t>(frames, 1));
  };

  const std::size_t batch = std::min(opt.batch_size, train.size());
  const std::size_t steps_per_epoch = (train.size() + batch - 1) / batch;
  std::size_t total = opt.epochs * steps_per_epoch;
  if (opt.max_steps != 0) total = std::min(total == 0 ? opt.max_steps : total, opt.max_steps);

  SelectorTrainingResult result;
  result.model = model;
  result.best_holdout_loss = holdout_loss(model);
  result.holdout_curve.emplace_back(0, result.best_holdout_loss);

  // Parameters as one flat block: weights then bias.
  std::vector<double> params(model.weights);
  params.push_back(model.bias);
  MomentumSgd sgd(params.size(), opt.momentum);
  std::vector<double> grad(params.size());
  std::size_t cursor = train.size();

  for (std::size_t step = 0; step < total; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::size_t frames = 0;
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor >= train.size()) {
        std::shuffle(train.begin(), train.end(), rng);
        cursor = 0;
      }
      const auto& ex = data[train[cursor++]];
      auto lg = selector_loss_and_grad(model, ex.frames, ex.labels);
      loss += lg.loss;
      for (std::size_t i = 0; i < dim; ++i) grad[i] += lg.grad_w[i];
      grad[dim] += lg.grad_b;
      frames += ex.frames.rows();
    }
    if (!std::isfinite(loss)) {
      throw NumericError("train_selector: non-finite loss at step " + std::to_string(step));
    }
    for (auto& g : grad) g /= static_cast<double>(frames);
    sgd.step(params, grad, learning_rate_at(opt, step, total));
    std::copy(params.begin(), params.begin() + dim, model.weights.begin());
    model.bias = params[dim];

    const bool last = step + 1 == total;
    if ((step + 1) % std::max<std::size_t>(options.eval_every, 1) == 0 || last) {
      const double hl = holdout_loss(model);
      if (!std::isfinite(hl)) throw NumericError("train_selector: non-finite held-out loss at step " + std::to_string(step));
      result.holdout_curve.emplace_back(step + 1, hl);
      if (hl < result.best_holdout_loss) {
        result.best_holdout_loss = hl;
        result.best_step = step + 1;
        result.model = model;
      }
    }
  }
  result.steps = total;
  return result;
}

std::vector<std::size_t> select_frame_indices(const SelectorModel& model, const FrameMatrix& frames) {
  const auto p = score_frames(model, frames);
  std::vector<std::size_t> kept;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t] > model.threshold) kept.push_back(t);
  }
  const std::size_t floor = std::min(model.min_keep, p.size());
  if (kept.size() >= floor) return kept;
  std::vector<std::size_t> by_prob(p.size());
  std::iota(by_prob.begin(), by_prob.end(), 0);
  std::stable_sort(by_prob.begin(), by_prob.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  kept.assign(by_prob.begin(), by_prob.begin() + static_cast<std::ptrdiff_t>(floor));
  std::sort(kept.begin(), kept.end());
  return kept;
}

FilterResult filter_frames(const SelectorModel& model, const FrameMatrix& frames) {
  FilterResult out;
  out.kept_indices = select_frame_indices(model, frames);
  out.kept = FrameMatrix(0, frames.cols());
  for (auto t : out.kept_indices) out.kept.append_row(frames.row(t));
  return out;
}

TokenF1 token_f1(const SelectorModel& model, const std::vector<LabelledSegment>& data) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& d : data) {
    const auto p = score_frames(model, d.frames);
    for (std::size_t t = 0; t < p.size(); ++t) {
      const bool pred = p[t] > model.threshold;
      const bool gold = d.labels.labels[t] != 0;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
  }
  TokenF1 out;
  out.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  out.f1 = out.precision + out.recall > 0 ? 2 * out.precision * out.recall / (out.precision + out.recall) : 0.0;
  return out;
}

std::string selector_to_json(const SelectorModel& model) {
  nlohmann::json j;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["threshold"] = model.threshold;
  j["min_keep"] = model.min_keep;
  j["frame_dim"] = model.frame_dim();
  return j.dump();
}

SelectorModel selector_from_json(const std::string& text) {
  SelectorModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.min_keep = j.at("min_keep").get<std::size_t>();
    if (j.at("frame_dim").get<std::size_t>() != m.weights.size()) {
      throw DataError("selector checkpoint: frame_dim does not match weight count");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("selector checkpoint: ") + e.what());
  }
  m.validate();
  return m;
}

void save_selector(const SelectorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << selector_to_json(model) << '\n';
  if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
}

SelectorModel load_selector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return selector_from_json(ss.str());
}

}  // namespace atir::selector
