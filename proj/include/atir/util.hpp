#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace atir {

/// 64-bit FNV-1a. Stable across platforms; used for word buckets, pseudo-word
/// embeddings, model fingerprints and artifact checksums.
uint64_t fnv1a64(std::string_view bytes, uint64_t basis = 0xcbf29ce484222325ULL);

/// SplitMix64 finalizer; derives independent sub-seeds from (seed, index).
uint64_t mix_seed(uint64_t seed, uint64_t index);

/// Whitespace split + ASCII lowercase. Empty tokens are dropped.
std::vector<std::string> pseudo_tokens(std::string_view text);

/// Formats a real with `digits` significant digits ("%.*g").
std::string format_real(double value, int digits);

/// Hex rendering of a 64-bit value, zero padded to 16 chars.
std::string hex64(uint64_t value);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// visited exactly once; callers write results into per-index slots so the
/// outcome does not depend on the worker count.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

}  // namespace atir
