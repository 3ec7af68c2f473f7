#include "atir/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "atir/error.hpp"
#include "atir/util.hpp"
#include "json.hpp"

namespace atir {

using nlohmann::json;

Segment Segment::make_text(std::string text) {
  Segment s;
  s.kind = SegmentKind::Text;
  s.text = std::move(text);
  return s;
}

Segment Segment::make_audio(FrameMatrix frames, std::vector<SpanAnnotation> spans,
                            std::optional<std::string> transcript) {
  Segment s;
  s.kind = SegmentKind::Audio;
  s.frames = std::move(frames);
  s.spans = std::move(spans);
  s.transcript = std::move(transcript);
  return s;
}

std::size_t InterleavedSequence::audio_segment_count() const {
  return static_cast<std::size_t>(
      std::count_if(segments.begin(), segments.end(), [](const Segment& s) { return s.is_audio(); }));
}

void validate_segment(const Segment& segment, std::size_t frame_dim, const std::string& owner_id) {
  auto fail = [&](const std::string& what) {
    throw DataError("invariant violation in '" + owner_id + "': " + what);
  };
  if (segment.is_text()) {
    if (segment.text.empty()) fail("text segment has empty text");
    if (!segment.frames.empty() || segment.frames.cols() != 0) fail("text segment carries frames");
    if (!segment.spans.empty()) fail("text segment carries spans");
    if (segment.transcript) fail("text segment carries a transcript");
    return;
  }
  if (!segment.text.empty()) fail("audio segment carries text");
  if (segment.frames.rows() == 0) fail("audio segment has no frames");
  if (frame_dim != 0 && segment.frames.cols() != frame_dim) {
    fail("frame_dim " + std::to_string(segment.frames.cols()) + " != configured " + std::to_string(frame_dim));
  }
  for (float v : segment.frames.data()) {
    if (!std::isfinite(v)) fail("non-finite frame value");
  }
  const int64_t duration = static_cast<int64_t>(segment.frames.rows()) * kFrameMs;
  std::vector<SpanAnnotation> sorted = segment.spans;
  std::sort(sorted.begin(), sorted.end(),
            [](const SpanAnnotation& a, const SpanAnnotation& b) { return a.start_ms < b.start_ms; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& sp = sorted[i];
    if (sp.start_ms < 0 || sp.start_ms >= sp.end_ms) fail("span requires 0 <= start_ms < end_ms");
    if (sp.end_ms > duration) fail("span exceeds audio duration of " + std::to_string(duration) + " ms");
    if (i > 0 && sp.start_ms < sorted[i - 1].end_ms) fail("overlapping spans");
  }
}

void validate_sequence(const InterleavedSequence& seq, std::size_t frame_dim) {
  if (seq.id.empty()) throw DataError("invariant violation: sequence with empty id");
  if (seq.segments.empty()) throw DataError("invariant violation in '" + seq.id + "': empty sequence");
  for (const auto& s : seq.segments) validate_segment(s, frame_dim, seq.id);
}

// --- Corpus ----------------------------------------------------------------

void Corpus::add(InterleavedSequence doc) {
  validate_sequence(doc, frame_dim_);
  if (index_.count(doc.id)) throw DataError("duplicate id '" + doc.id + "'");
  index_.emplace(doc.id, docs_.size());
  docs_.push_back(std::move(doc));
}

const InterleavedSequence* Corpus::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &docs_[it->second];
}

const InterleavedSequence& Corpus::at(const std::string& id) const {
  const auto* doc = find(id);
  if (!doc) throw DataError("unknown document id '" + id + "'");
  return *doc;
}

// --- Qrels -----------------------------------------------------------------

void Qrels::set(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0) throw DataError("negative relevance grade for (" + query_id + ", " + doc_id + ")");
  judgments_[query_id][doc_id] = grade;
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
  auto q = judgments_.find(query_id);
  if (q == judgments_.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

std::vector<std::string> Qrels::positives(const std::string& query_id) const {
  std::vector<std::string> out;
  auto q = judgments_.find(query_id);
  if (q == judgments_.end()) return out;
  for (const auto& [doc, g] : q->second) {
    if (g >= 1) out.push_back(doc);
  }
  return out;
}

const std::map<std::string, int>& Qrels::judgments(const std::string& query_id) const {
  auto q = judgments_.find(query_id);
  if (q == judgments_.end()) throw DataError("query '" + query_id + "' missing from qrels");
  return q->second;
}

std::vector<std::string> Qrels::query_ids() const {
  std::vector<std::string> out;
  for (const auto& [q, _] : judgments_) out.push_back(q);
  return out;
}

std::size_t Qrels::size() const {
  std::size_t n = 0;
  for (const auto& [_, m] : judgments_) n += m.size();
  return n;
}

// --- RankedList ------------------------------------------------------------

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

namespace {

void check_unique_ids(const std::string& query_id, const std::vector<ScoredDoc>& entries) {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.doc_id).second) {
      throw DataError("duplicate doc id '" + e.doc_id + "' in ranked list for query '" + query_id + "'");
    }
  }
}

}  // namespace

RankedList RankedList::from_unsorted(std::string query_id, std::vector<ScoredDoc> entries) {
  for (const auto& e : entries) {
    if (std::isnan(e.score)) throw DataError("NaN score in ranked list for query '" + query_id + "'");
  }
  std::sort(entries.begin(), entries.end(), ranks_before);
  check_unique_ids(query_id, entries);
  RankedList out;
  out.query_id_ = std::move(query_id);
  out.entries_ = std::move(entries);
  return out;
}

RankedList RankedList::from_sorted(std::string query_id, std::vector<ScoredDoc> entries) {
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (!ranks_before(entries[i - 1], entries[i])) {
      throw DataError("ordering violation in ranked list for query '" + query_id + "' at position " +
                      std::to_string(i + 1));
    }
  }
  for (const auto& e : entries) {
    if (std::isnan(e.score)) throw DataError("NaN score in ranked list for query '" + query_id + "'");
  }
  // Strict ordering already implies unique ids.
  RankedList out;
  out.query_id_ = std::move(query_id);
  out.entries_ = std::move(entries);
  return out;
}

std::optional<std::size_t> RankedList::rank_of(const std::string& doc_id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].doc_id == doc_id) return i + 1;
  }
  return std::nullopt;
}

// --- sequence JSON ---------------------------------------------------------

namespace {

std::string quoted(const std::string& s) { return json(s).dump(); }

void write_frames(std::ostringstream& os, const FrameMatrix& frames) {
  os << '[';
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    if (r) os << ',';
    os << '[';
    auto row = frames.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      os << format_real(static_cast<double>(row[c]), 9);
    }
    os << ']';
  }
  os << ']';
}

template <typename T>
T require_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw DataError(where + ": field '" + key + "' has wrong type");
  }
}

}  // namespace

std::string sequence_to_json_line(const InterleavedSequence& seq) {
  std::ostringstream os;
  os << "{\"id\":" << quoted(seq.id) << ",\"segments\":[";
  for (std::size_t i = 0; i < seq.segments.size(); ++i) {
    const auto& s = seq.segments[i];
    if (i) os << ',';
    if (s.is_text()) {
      os << "{\"kind\":\"text\",\"text\":" << quoted(s.text) << '}';
      continue;
    }
    // keys in sorted order: frames, kind, spans, transcript
    os << "{\"frames\":";
    write_frames(os, s.frames);
    os << ",\"kind\":\"audio\",\"spans\":[";
    for (std::size_t k = 0; k < s.spans.size(); ++k) {
      if (k) os << ',';
      os << "{\"end_ms\":" << s.spans[k].end_ms << ",\"start_ms\":" << s.spans[k].start_ms << '}';
    }
    os << ']';
    if (s.transcript) os << ",\"transcript\":" << quoted(*s.transcript);
    os << '}';
  }
  os << "]}";
  return os.str();
}

InterleavedSequence sequence_from_json_line(const std::string& line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw DataError("line is not a JSON object");
  InterleavedSequence seq;
  seq.id = require_field<std::string>(obj, "id", "sequence");
  const std::string where = "sequence '" + seq.id + "'";
  auto segs = obj.find("segments");
  if (segs == obj.end() || !segs->is_array()) throw DataError(where + ": missing 'segments' array");
  for (const auto& js : *segs) {
    if (!js.is_object()) throw DataError(where + ": segment is not an object");
    const auto kind = require_field<std::string>(js, "kind", where);
    if (kind == "text") {
      if (js.contains("frames") || js.contains("spans") || js.contains("transcript")) {
        throw DataError("invariant violation in '" + seq.id + "': text segment carries audio fields");
      }
      seq.segments.push_back(Segment::make_text(require_field<std::string>(js, "text", where)));
    } else if (kind == "audio") {
      if (js.contains("text")) {
        throw DataError("invariant violation in '" + seq.id + "': audio segment carries text");
      }
      auto jf = js.find("frames");
      if (jf == js.end() || !jf->is_array()) throw DataError(where + ": audio segment without 'frames' array");
      FrameMatrix frames;
      for (const auto& jrow : *jf) {
        if (!jrow.is_array()) throw DataError(where + ": frame row is not an array");
        std::vector<float> row;
        row.reserve(jrow.size());
        for (const auto& v : jrow) {
          if (!v.is_number()) throw DataError(where + ": non-numeric frame value");
          row.push_back(static_cast<float>(v.get<double>()));
        }
        if (!frames.empty() && row.size() != frames.cols()) throw DataError(where + ": ragged frame matrix");
        frames.append_row(row);
      }
      std::vector<SpanAnnotation> spans;
      if (auto jsn = js.find("spans"); jsn != js.end()) {
        if (!jsn->is_array()) throw DataError(where + ": 'spans' is not an array");
        for (const auto& sp : *jsn) {
          spans.push_back({require_field<int64_t>(sp, "start_ms", where), require_field<int64_t>(sp, "end_ms", where)});
        }
      }
      std::optional<std::string> transcript;
      if (auto jt = js.find("transcript"); jt != js.end() && !jt->is_null()) {
        transcript = require_field<std::string>(js, "transcript", where);
      }
      seq.segments.push_back(Segment::make_audio(std::move(frames), std::move(spans), std::move(transcript)));
    } else {
      throw DataError(where + ": unknown segment kind '" + kind + "'");
    }
  }
  return seq;
}

// --- files -----------------------------------------------------------------

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
}

std::vector<InterleavedSequence> read_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<InterleavedSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(sequence_from_json_line(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::size_t infer_frame_dim(const std::vector<InterleavedSequence>& seqs) {
  for (const auto& s : seqs) {
    for (const auto& seg : s.segments) {
      if (seg.is_audio()) return seg.frames.cols();
    }
  }
  return kDefaultFrameDim;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

long long parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": expected integer, got '" + s + "'");
  }
  if (used != s.size()) throw DataError(where + ": expected integer, got '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": expected real, got '" + s + "'");
  }
  if (used != s.size()) throw DataError(where + ": expected real, got '" + s + "'");
  return v;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, std::size_t frame_dim) {
  auto seqs = read_jsonl(path);
  if (frame_dim == 0) frame_dim = infer_frame_dim(seqs);
  Corpus corpus(frame_dim);
  for (auto& s : seqs) corpus.add(std::move(s));
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  save_sequences(corpus.documents(), path);
}

std::vector<InterleavedSequence> load_sequences(const std::filesystem::path& path, std::size_t frame_dim) {
  auto seqs = read_jsonl(path);
  if (frame_dim == 0) frame_dim = infer_frame_dim(seqs);
  std::set<std::string> ids;
  for (const auto& s : seqs) {
    validate_sequence(s, frame_dim);
    if (!ids.insert(s.id).second) throw DataError("duplicate id '" + s.id + "'");
  }
  return seqs;
}

void save_sequences(const std::vector<InterleavedSequence>& seqs, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& s : seqs) out << sequence_to_json_line(s) << '\n';
  finish(out, path);
}

Qrels load_qrels(const std::filesystem::path& path) {
  auto in = open_in(path);
  Qrels q;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    auto cols = split_tabs(line);
    if (cols.size() != 3) throw DataError(where + ": expected 3 tab-separated columns");
    q.set(cols[0], cols[1], static_cast<int>(parse_int(cols[2], where)));
  }
  return q;
}

void save_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& [qid, docs] : qrels.all()) {
    for (const auto& [doc, grade] : docs) out << qid << '\t' << doc << '\t' << grade << '\n';
  }
  finish(out, path);
}

std::string run_to_string(const std::vector<RankedList>& run) {
  std::ostringstream os;
  for (const auto& list : run) {
    // Re-validate so a hand-built list cannot produce an inconsistent file.
    RankedList::from_sorted(list.query_id(), list.entries());
    std::size_t rank = 1;
    for (const auto& e : list.entries()) {
      os << list.query_id() << '\t' << e.doc_id << '\t' << rank++ << '\t' << format_real(e.score, 17) << '\n';
    }
  }
  return os.str();
}

void write_run(const std::vector<RankedList>& run, const std::filesystem::path& path) {
  const auto text = run_to_string(run);
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

std::vector<RankedList> read_run(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<RankedList> run;
  std::string current_q;
  std::vector<ScoredDoc> entries;
  std::set<std::string> finished;
  auto flush = [&] {
    if (current_q.empty()) return;
    run.push_back(RankedList::from_sorted(current_q, std::move(entries)));
    finished.insert(current_q);
    entries.clear();
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    auto cols = split_tabs(line);
    if (cols.size() != 4) throw DataError(where + ": expected 4 tab-separated columns");
    if (cols[0] != current_q) {
      flush();
      if (finished.count(cols[0])) throw DataError(where + ": query '" + cols[0] + "' is not contiguous");
      current_q = cols[0];
    }
    const long long rank = parse_int(cols[2], where);
    if (rank != static_cast<long long>(entries.size()) + 1) {
      throw DataError(where + ": rank " + std::to_string(rank) + " does not match position " +
                      std::to_string(entries.size() + 1));
    }
    entries.push_back({cols[1], parse_double(cols[3], where)});
  }
  flush();
  return run;
}

}  // namespace atir
