#pragma once

// Domain types for interleaved audio-text retrieval: segments, sequences,
// corpora, relevance judgments and ranked result lists, plus their on-disk
// formats (JSONL for sequences, TSV for qrels and runs).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "atir/matrix.hpp"

namespace atir {

/// Every audio frame covers this many milliseconds of signal.
inline constexpr int64_t kFrameMs = 40;
inline constexpr std::size_t kDefaultFrameDim = 32;

enum class SegmentKind { Text, Audio };

struct SpanAnnotation {
  int64_t start_ms = 0;
  int64_t end_ms = 0;
  friend bool operator==(const SpanAnnotation&, const SpanAnnotation&) = default;
};

/// One text chunk or one audio segment. Audio is a [num_frames x frame_dim]
/// feature matrix with optional salient-span annotations and a transcript.
struct Segment {
  SegmentKind kind = SegmentKind::Text;
  std::string text;
  FrameMatrix frames;
  std::vector<SpanAnnotation> spans;
  std::optional<std::string> transcript;

  static Segment make_text(std::string text);
  static Segment make_audio(FrameMatrix frames, std::vector<SpanAnnotation> spans = {},
                            std::optional<std::string> transcript = std::nullopt);

  bool is_audio() const { return kind == SegmentKind::Audio; }
  bool is_text() const { return kind == SegmentKind::Text; }
  std::size_t num_frames() const { return frames.rows(); }

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct InterleavedSequence {
  std::string id;
  std::vector<Segment> segments;

  std::size_t audio_segment_count() const;
  friend bool operator==(const InterleavedSequence&, const InterleavedSequence&) = default;
};

/// Throws DataError naming the violated invariant. `frame_dim` == 0 skips the
/// frame dimension check.
void validate_segment(const Segment& segment, std::size_t frame_dim, const std::string& owner_id);
void validate_sequence(const InterleavedSequence& seq, std::size_t frame_dim);

/// Id-indexed document collection; insertion order is preserved and defines
/// iteration order.
class Corpus {
 public:
  explicit Corpus(std::size_t frame_dim = kDefaultFrameDim) : frame_dim_(frame_dim) {}

  /// Validates and inserts; duplicate ids are rejected.
  void add(InterleavedSequence doc);

  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  std::size_t frame_dim() const { return frame_dim_; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const InterleavedSequence* find(const std::string& id) const;
  /// Throws DataError when the id is unknown.
  const InterleavedSequence& at(const std::string& id) const;
  const InterleavedSequence& operator[](std::size_t i) const { return docs_[i]; }

  const std::vector<InterleavedSequence>& documents() const { return docs_; }
  auto begin() const { return docs_.begin(); }
  auto end() const { return docs_.end(); }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.frame_dim_ == b.frame_dim_ && a.docs_ == b.docs_;
  }

 private:
  std::size_t frame_dim_;
  std::vector<InterleavedSequence> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Relevance judgments: (query id, doc id) -> non-negative integer grade.
class Qrels {
 public:
  void set(const std::string& query_id, const std::string& doc_id, int grade);
  /// 0 for unjudged pairs.
  int grade(const std::string& query_id, const std::string& doc_id) const;
  bool has_query(const std::string& query_id) const { return judgments_.count(query_id) != 0; }
  /// Doc ids with grade >= 1, ascending.
  std::vector<std::string> positives(const std::string& query_id) const;
  /// All judgments for a query; throws DataError when absent.
  const std::map<std::string, int>& judgments(const std::string& query_id) const;
  std::vector<std::string> query_ids() const;
  const std::map<std::string, std::map<std::string, int>>& all() const { return judgments_; }
  std::size_t size() const;

  friend bool operator==(const Qrels&, const Qrels&) = default;

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// True when a should be ranked before b: higher score first, ties broken by
/// ascending doc id.
bool ranks_before(const ScoredDoc& a, const ScoredDoc& b);

/// Per-query results ordered by (score desc, doc id asc) with unique doc ids.
class RankedList {
 public:
  RankedList() = default;
  /// Sorts arbitrary entries into canonical order; duplicate ids are rejected.
  static RankedList from_unsorted(std::string query_id, std::vector<ScoredDoc> entries);
  /// Accepts entries that are already canonical; throws DataError otherwise.
  static RankedList from_sorted(std::string query_id, std::vector<ScoredDoc> entries);

  const std::string& query_id() const { return query_id_; }
  const std::vector<ScoredDoc>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// 1-based rank of doc_id, or nullopt when absent.
  std::optional<std::size_t> rank_of(const std::string& doc_id) const;

  friend bool operator==(const RankedList&, const RankedList&) = default;

 private:
  std::string query_id_;
  std::vector<ScoredDoc> entries_;
};

// --- serialization -------------------------------------------------------

/// Canonical single-line JSON for a sequence: sorted keys, frames with 9
/// significant digits.
std::string sequence_to_json_line(const InterleavedSequence& seq);
/// Parses one JSONL line. Structural problems throw DataError.
InterleavedSequence sequence_from_json_line(const std::string& line);

/// `frame_dim` == 0 infers the dimension from the first audio segment (or the
/// default when no audio exists).
Corpus load_corpus(const std::filesystem::path& path, std::size_t frame_dim = 0);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Query files share the corpus line format; ids must be unique.
std::vector<InterleavedSequence> load_sequences(const std::filesystem::path& path, std::size_t frame_dim = 0);
void save_sequences(const std::vector<InterleavedSequence>& seqs, const std::filesystem::path& path);

Qrels load_qrels(const std::filesystem::path& path);
void save_qrels(const Qrels& qrels, const std::filesystem::path& path);

/// Run files: `qid<TAB>docid<TAB>rank<TAB>score`, rank 1-based.
void write_run(const std::vector<RankedList>& run, const std::filesystem::path& path);
std::vector<RankedList> read_run(const std::filesystem::path& path);
std::string run_to_string(const std::vector<RankedList>& run);

}  // namespace atir
