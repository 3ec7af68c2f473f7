#include "atir/optim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "atir/error.hpp"

namespace atir {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("optimizer: learning_rate must be > 0");
  if (!(lr_scale > 0.0) || !std::isfinite(lr_scale)) throw ConfigError("optimizer: lr_scale must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("optimizer: warmup_fraction must lie in [0, 1]");
  if (batch_size == 0) throw ConfigError("optimizer: batch_size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
  for (double m : {text_rate_mult, audio_rate_mult, fusion_rate_mult}) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("optimizer: rate multipliers must be > 0");
  }
}

std::size_t warmup_steps(const OptimizerConfig& cfg, std::size_t total_steps) {
  const auto frac = static_cast<std::size_t>(std::ceil(cfg.warmup_fraction * static_cast<double>(total_steps)));
  return std::min(frac, cfg.max_warmup_steps);
}

double learning_rate_at(const OptimizerConfig& cfg, std::size_t step, std::size_t total_steps) {
  const std::size_t warm = warmup_steps(cfg, total_steps);
  if (warm == 0 || step >= warm) return cfg.peak_rate();
  return cfg.peak_rate() * static_cast<double>(step + 1) / static_cast<double>(warm);
}

void MomentumSgd::step(std::span<double> params, std::span<const double> grad, double lr) {
  assert(params.size() == velocity_.size() && grad.size() == velocity_.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + grad[i];
    params[i] -= lr * velocity_[i];
  }
}

RowSparseMomentum::RowSparseMomentum(std::size_t rows, std::size_t cols, double momentum)
    : velocity_(rows, cols), updated_(rows, 0), momentum_(momentum) {}

void RowSparseMomentum::catch_up(Matrix<double>& params, std::size_t row, std::size_t upto) {
  std::size_t done = updated_[row];
  if (done >= upto) return;
  updated_[row] = upto;
  if (done == 0) return;  // never touched: velocity is zero
  // Steps done..upto-1 had zero gradient: v_k = m^k v, p -= lr_k v_k.
  double decay = 1.0;
  double coeff = 0.0;
  for (std::size_t k = done; k < upto; ++k) {
    decay *= momentum_;
    if (decay < kVelocityCutoff) {
      decay = 0.0;
      break;
    }
    coeff += rates_[k] * decay;
  }
  auto v = velocity_.row(row);
  auto p = params.row(row);
  for (std::size_t j = 0; j < v.size(); ++j) {
    p[j] -= coeff * v[j];
    v[j] *= decay;
  }
}

void RowSparseMomentum::step(Matrix<double>& params, const std::map<std::size_t, std::vector<double>>& grads,
                             double lr) {
  const std::size_t t = rates_.size();
  rates_.push_back(lr);
  for (const auto& [row, g] : grads) {
    catch_up(params, row, t);
    auto v = velocity_.row(row);
    auto p = params.row(row);
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j];
      p[j] -= lr * v[j];
    }
    updated_[row] = t + 1;
  }
}

void RowSparseMomentum::flush(Matrix<double>& params) {
  for (std::size_t r = 0; r < params.rows(); ++r) catch_up(params, r, rates_.size());
}

}  // namespace atir
