#include "atir/retrieval.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <set>

#include "atir/error.hpp"
#include "atir/util.hpp"

namespace atir::retrieval {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'T', 'I', 'R', 'I', 'D', 'X', '\0'};
// Row norms are checked in float storage, so the tolerance is float-level.
constexpr double kRowNormTolerance = 1e-5;

double row_dot(std::span<const float> row, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) s += static_cast<double>(row[i]) * q[i];
  return s;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((static_cast<uint64_t>(value) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& in) {
  uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) throw DataError("index file truncated");
    v |= static_cast<uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

void EmbeddingIndex::validate() const {
  if (matrix.rows() != ids.size()) throw DataError("index: row count does not match id count");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen.insert(ids[i]).second) throw DataError("index: duplicate id '" + ids[i] + "'");
    double n2 = 0.0;
    for (float v : matrix.row(i)) n2 += static_cast<double>(v) * v;
    if (std::abs(std::sqrt(n2) - 1.0) > kRowNormTolerance) {
      throw DataError("index: row for '" + ids[i] + "' is not unit norm");
    }
  }
}

EmbeddingIndex build_index(const encoder::RetrieverModel& model, const Corpus& corpus,
                           const encoder::AudioFrontEnd& front_end, std::size_t workers) {
  EmbeddingIndex index;
  index.model_fingerprint = encoder::model_fingerprint(model);
  const auto& docs = corpus.documents();
  index.ids.reserve(docs.size());
  for (const auto& d : docs) index.ids.push_back(d.id);
  index.matrix = Matrix<float>(docs.size(), model.dims.d_out);
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    encoder::Embedding e;
    try {
      e = encoder::encode_sequence(model, docs[i], front_end);
    } catch (const std::exception& ex) {
      throw DataError("build_index: cannot encode '" + docs[i].id + "': " + ex.what());
    }
    auto row = index.matrix.row(i);
    for (std::size_t j = 0; j < e.size(); ++j) row[j] = static_cast<float>(e[j]);
  });
  return index;
}

RankedList search(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                  const std::string& query_id) {
  if (k == 0) throw ConfigError("search: k must be >= 1");
  if (index.size() > 0 && query.size() != index.dim()) {
    throw DataError("search: query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                    std::to_string(index.dim()));
  }
  const std::size_t keep = std::min(k, index.size());
  // Max-heap on "worst first" so the root is the entry to evict.
  auto worse = [](const ScoredDoc& a, const ScoredDoc& b) { return ranks_before(a, b); };
  std::priority_queue<ScoredDoc, std::vector<ScoredDoc>, decltype(worse)> heap(worse);
  for (std::size_t i = 0; i < index.size() && keep > 0; ++i) {
    ScoredDoc cand{index.ids[i], row_dot(index.matrix.row(i), query)};
    if (heap.size() < keep) {
      heap.push(std::move(cand));
    } else if (ranks_before(cand, heap.top())) {
      heap.pop();
      heap.push(std::move(cand));
    }
  }
  std::vector<ScoredDoc> out;
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return RankedList::from_sorted(query_id, std::move(out));
}

std::vector<RankedList> batch_search(const EmbeddingIndex& index, const std::vector<QueryEmbedding>& queries,
                                     std::size_t k, std::size_t workers) {
  std::vector<RankedList> out(queries.size());
  parallel_for(queries.size(), workers,
               [&](std::size_t i) { out[i] = search(index, queries[i].embedding, k, queries[i].id); });
  return out;
}

std::vector<QueryEmbedding> encode_queries(const encoder::RetrieverModel& model,
                                           const std::vector<InterleavedSequence>& queries,
                                           const encoder::AudioFrontEnd& front_end, std::size_t workers) {
  std::vector<QueryEmbedding> out(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    out[i] = {queries[i].id, encoder::encode_sequence(model, queries[i], front_end)};
  });
  return out;
}

void save_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic.data(), kMagic.size());
  put_le<uint32_t>(out, kIndexFormatVersion);
  put_le<uint64_t>(out, index.size());
  put_le<uint64_t>(out, index.dim());
  put_le<uint64_t>(out, index.model_fingerprint);
  for (const auto& id : index.ids) {
    put_le<uint32_t>(out, static_cast<uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (float v : index.matrix.data()) put_le<uint32_t>(out, std::bit_cast<uint32_t>(v));
  if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
}

EmbeddingIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("'" + path.string() + "' is not an index file");
  const auto version = get_le<uint32_t>(in);
  if (version != kIndexFormatVersion) {
    throw DataError("index '" + path.string() + "': unsupported version " + std::to_string(version));
  }
  const auto m = get_le<uint64_t>(in);
  const auto d = get_le<uint64_t>(in);
  EmbeddingIndex index;
  index.model_fingerprint = get_le<uint64_t>(in);
  index.ids.reserve(m);
  for (uint64_t i = 0; i < m; ++i) {
    const auto len = get_le<uint32_t>(in);
    std::string id(len, '\0');
    in.read(id.data(), len);
    if (!in) throw DataError("index file truncated");
    index.ids.push_back(std::move(id));
  }
  index.matrix = Matrix<float>(m, d);
  for (auto& v : index.matrix.data()) v = std::bit_cast<float>(get_le<uint32_t>(in));
  if (in.peek() != EOF) throw DataError("index '" + path.string() + "': trailing bytes");
  index.validate();
  return index;
}

}  // namespace atir::retrieval
