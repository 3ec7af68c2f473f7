#pragma once

// Toy bi-encoder: hashed word embeddings for text, a linear projection of
// (optionally selector-filtered) mean frame features for audio, fixed
// multiplicative positional gates, mean pooling over segments, a fusion
// projection and L2 normalisation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atir/core.hpp"
#include "atir/matrix.hpp"
#include "atir/selector.hpp"

namespace atir::encoder {

/// How audio frames are reduced before projection.
struct AudioFrontEnd {
  enum class Kind { AllFrames, Selector, Pool };
  Kind kind = Kind::Selector;
  std::size_t pool_k = 0;

  static AudioFrontEnd all_frames() { return {Kind::AllFrames, 0}; }
  static AudioFrontEnd selector() { return {Kind::Selector, 0}; }
  static AudioFrontEnd pool(std::size_t k) { return {Kind::Pool, k}; }
  std::string name() const;
  friend bool operator==(const AudioFrontEnd&, const AudioFrontEnd&) = default;
};

struct ModelDims {
  std::size_t vocab_buckets = 4096;
  std::size_t d = 64;
  std::size_t d_out = 64;
  std::size_t frame_dim = kDefaultFrameDim;
  std::size_t max_segments = 8;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

using Embedding = std::vector<double>;

/// Fixed gates: gate[i][j] = 1 + 0.5 sin(1 + (i + 1)(0.9 + 0.37 j)), so every
/// entry lies in [0.5, 1.5] and rows differ by position.
Matrix<double> positional_gates(std::size_t max_segments, std::size_t d);

struct RetrieverModel {
  ModelDims dims;
  Matrix<double> text_table;  // [vocab_buckets x d]
  Matrix<double> audio_proj;  // [frame_dim x d]
  Matrix<double> fusion;      // [d x d_out]
  Matrix<double> gates;       // [max_segments x d], not learned
  double tau = 0.05;
  selector::SelectorModel selector;

  /// Gaussian initialisation from a seed; selector starts at zeros.
  static RetrieverModel initialize(const ModelDims& dims, uint64_t seed, double tau = 0.05);

  /// Throws ConfigError on inconsistent shapes or tau <= 0.
  void validate() const;
  /// Learnable retriever parameters plus selector parameters.
  std::size_t parameter_count() const;

  friend bool operator==(const RetrieverModel&, const RetrieverModel&) = default;
};

std::size_t word_bucket(std::string_view word, std::size_t buckets);

std::vector<double> encode_text_segment(const RetrieverModel& model, std::string_view text);
std::vector<double> encode_audio_segment(const RetrieverModel& model, const Segment& segment,
                                         const AudioFrontEnd& front_end);
Embedding encode_sequence(const RetrieverModel& model, const InterleavedSequence& seq, const AudioFrontEnd& front_end);

/// Dot product of two unit vectors, i.e. their cosine.
double similarity(std::span<const double> a, std::span<const double> b);

/// Splits frames into k contiguous near-equal chunks (the first n mod k get
/// one extra frame) and averages each. Fewer than k frames come back as is.
FrameMatrix pool_audio_kway(const FrameMatrix& frames, std::size_t k);

/// Frames that reach mean pooling under the front end (for latency reports).
std::size_t processed_frames(const RetrieverModel& model, const InterleavedSequence& seq,
                             const AudioFrontEnd& front_end);

// --- forward trace and backward pass ---------------------------------------

struct SegmentTrace {
  bool audio = false;
  std::vector<std::size_t> buckets;  // text: one entry per token
  std::vector<double> frame_mean;    // audio: mean of the reduced frames
  std::vector<double> vec;           // segment vector e_i
};

struct EncodeTrace {
  std::vector<SegmentTrace> segments;
  std::vector<double> pooled;     // m = mean_i e_i * gate_i
  std::vector<double> projected;  // z = m W_f
  double norm = 0.0;              // |z|
  Embedding embedding;
};

EncodeTrace encode_with_trace(const RetrieverModel& model, const InterleavedSequence& seq,
                              const AudioFrontEnd& front_end);

/// Gradients for the learnable blocks (gates and selector are frozen). The
/// text table gradient is row-sparse: rows absent from text_rows are zero.
struct Gradients {
  std::map<std::size_t, std::vector<double>> text_rows;
  std::size_t text_cols = 0;
  Matrix<double> audio_proj;
  Matrix<double> fusion;

  static Gradients zeros_like(const RetrieverModel& model);
  /// Row `row` of the text gradient, created as zeros on first access.
  std::vector<double>& text_row(std::size_t row);
  Matrix<double> text_table_dense(std::size_t vocab_buckets) const;
  void scale(double factor);
  double squared_norm() const;
};

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(embedding).
void backprop_embedding(const RetrieverModel& model, const EncodeTrace& trace, std::span<const double> d_embedding,
                        Gradients& grads);

// --- checkpoints ------------------------------------------------------------

inline constexpr int kCheckpointFormatVersion = 1;

std::string checkpoint_to_json(const RetrieverModel& model);
RetrieverModel checkpoint_from_json(const std::string& text);
void save_checkpoint(const RetrieverModel& model, const std::filesystem::path& path);
RetrieverModel load_checkpoint(const std::filesystem::path& path);
/// FNV-1a hash over dims, tau and the raw bytes of all parameters.
uint64_t model_fingerprint(const RetrieverModel& model);

}  // namespace atir::encoder
