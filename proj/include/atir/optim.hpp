#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "atir/matrix.hpp"

namespace atir {

/// Shared optimizer settings. The effective peak rate is
/// learning_rate * lr_scale; lr_scale lets desk-scale runs keep the nominal
/// 5e-5 while training tiny models at a usable step size.
struct OptimizerConfig {
  double learning_rate = 5e-5;
  double lr_scale = 1.0;
  double warmup_fraction = 0.10;
  std::size_t max_warmup_steps = 500;
  std::size_t epochs = 2;
  std::size_t batch_size = 32;
  uint64_t seed = 1;
  double momentum = 0.9;
  /// 0 means "epochs decide".
  std::size_t max_steps = 0;
  /// Per-block step multipliers for the retriever (text table, audio
  /// projection, fusion). The hashed table sees sparse gradients scaled by
  /// 1/tokens, so it usually wants a larger step than the dense blocks.
  double text_rate_mult = 1.0;
  double audio_rate_mult = 1.0;
  double fusion_rate_mult = 1.0;

  void validate() const;
  double peak_rate() const { return learning_rate * lr_scale; }
};

/// Number of linear warm-up steps for a run of `total_steps`.
std::size_t warmup_steps(const OptimizerConfig& cfg, std::size_t total_steps);

/// Linear warm-up to the peak rate, then constant. `step` is 0-based.
double learning_rate_at(const OptimizerConfig& cfg, std::size_t step, std::size_t total_steps);

/// SGD with heavy-ball momentum over one flat parameter block:
/// v <- momentum * v + g ; p <- p - lr * v.
class MomentumSgd {
 public:
  MomentumSgd(std::size_t size, double momentum) : velocity_(size, 0.0), momentum_(momentum) {}
  void step(std::span<double> params, std::span<const double> grad, double lr);

 private:
  std::vector<double> velocity_;
  double momentum_;
};

/// Momentum SGD over the rows of a matrix whose gradients are row-sparse.
/// Rows without gradient are brought up to date lazily, the next time they
/// are touched or on flush(). Matches MomentumSgd on the dense matrix except
/// that a velocity is dropped once its decay factor momentum^k falls below
/// kVelocityCutoff.
class RowSparseMomentum {
 public:
  static constexpr double kVelocityCutoff = 1e-16;

  RowSparseMomentum(std::size_t rows, std::size_t cols, double momentum);
  void step(Matrix<double>& params, const std::map<std::size_t, std::vector<double>>& grads, double lr);
  /// Applies all pending zero-gradient updates.
  void flush(Matrix<double>& params);
  std::size_t steps() const { return rates_.size(); }

 private:
  void catch_up(Matrix<double>& params, std::size_t row, std::size_t upto);

  Matrix<double> velocity_;
  std::vector<std::size_t> updated_;  // steps applied to each row so far
  std::vector<double> rates_;         // learning rate of every step taken
  double momentum_;
};

}  // namespace atir
