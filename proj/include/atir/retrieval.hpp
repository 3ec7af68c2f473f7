#pragma once

// Exact dot-product index over unit-norm document embeddings.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "atir/core.hpp"
#include "atir/encoder.hpp"
#include "atir/matrix.hpp"

namespace atir::retrieval {

struct EmbeddingIndex {
  std::vector<std::string> ids;
  Matrix<float> matrix;  // [m x d_out], row i <-> ids[i]
  uint64_t model_fingerprint = 0;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return matrix.cols(); }
  /// Throws DataError on duplicate ids, shape mismatch or non-unit rows.
  void validate() const;
  friend bool operator==(const EmbeddingIndex&, const EmbeddingIndex&) = default;
};

/// Encodes every document (parallel over documents, fixed row order).
EmbeddingIndex build_index(const encoder::RetrieverModel& model, const Corpus& corpus,
                           const encoder::AudioFrontEnd& front_end, std::size_t workers = 1);

/// Top-min(k, m) rows by dot product, ties broken by doc id ascending.
RankedList search(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                  const std::string& query_id = {});

struct QueryEmbedding {
  std::string id;
  encoder::Embedding embedding;
};

std::vector<RankedList> batch_search(const EmbeddingIndex& index, const std::vector<QueryEmbedding>& queries,
                                     std::size_t k, std::size_t workers = 1);

/// Encodes queries (parallel, order preserved).
std::vector<QueryEmbedding> encode_queries(const encoder::RetrieverModel& model,
                                           const std::vector<InterleavedSequence>& queries,
                                           const encoder::AudioFrontEnd& front_end, std::size_t workers = 1);

inline constexpr uint32_t kIndexFormatVersion = 1;

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex load_index(const std::filesystem::path& path);

}  // namespace atir::retrieval
