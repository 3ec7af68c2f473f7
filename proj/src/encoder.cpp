#include "atir/encoder.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "atir/error.hpp"
#include "atir/util.hpp"
#include "json.hpp"

namespace atir::encoder {

std::string AudioFrontEnd::name() const {
  switch (kind) {
    case Kind::AllFrames: return "all-frames";
    case Kind::Selector: return "selector";
    case Kind::Pool: return "pool-" + std::to_string(pool_k);
  }
  return "unknown";
}

Matrix<double> positional_gates(std::size_t max_segments, std::size_t d) {
  Matrix<double> g(max_segments, d);
  for (std::size_t i = 0; i < max_segments; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      g(i, j) = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(i + 1) * (0.9 + 0.37 * static_cast<double>(j)));
    }
  }
  return g;
}

RetrieverModel RetrieverModel::initialize(const ModelDims& dims, uint64_t seed, double tau) {
  RetrieverModel m;
  m.dims = dims;
  m.tau = tau;
  std::mt19937_64 rng(seed);
  auto gaussian = [&](std::size_t rows, std::size_t cols, double sd) {
    std::normal_distribution<double> normal(0.0, sd);
    Matrix<double> out(rows, cols);
    for (auto& v : out.data()) v = normal(rng);
    return out;
  };
  m.text_table = gaussian(dims.vocab_buckets, dims.d, 1.0 / std::sqrt(static_cast<double>(dims.d)));
  m.audio_proj = gaussian(dims.frame_dim, dims.d, 1.0 / std::sqrt(static_cast<double>(dims.frame_dim)));
  m.fusion = gaussian(dims.d, dims.d_out, 1.0 / std::sqrt(static_cast<double>(dims.d)));
  m.gates = positional_gates(dims.max_segments, dims.d);
  m.selector = selector::SelectorModel::zeros(dims.frame_dim);
  m.validate();
  return m;
}

void RetrieverModel::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("retriever model: " + what); };
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be > 0");
  if (dims.vocab_buckets == 0 || dims.d == 0 || dims.d_out == 0 || dims.frame_dim == 0 || dims.max_segments == 0) {
    fail("all dimensions must be positive");
  }
  if (text_table.rows() != dims.vocab_buckets || text_table.cols() != dims.d) fail("text_table shape");
  if (audio_proj.rows() != dims.frame_dim || audio_proj.cols() != dims.d) fail("audio_proj shape");
  if (fusion.rows() != dims.d || fusion.cols() != dims.d_out) fail("fusion shape");
  if (gates.rows() != dims.max_segments || gates.cols() != dims.d) fail("gates shape");
  for (double g : gates.data()) {
    if (!(g > 0.0)) fail("positional gates must be strictly positive");
  }
  if (selector.frame_dim() != dims.frame_dim) fail("selector frame_dim");
  selector.validate();
}

std::size_t RetrieverModel::parameter_count() const {
  return text_table.data().size() + audio_proj.data().size() + fusion.data().size() + selector.weights.size() + 1;
}

std::size_t word_bucket(std::string_view word, std::size_t buckets) {
  return static_cast<std::size_t>(fnv1a64(word) % buckets);
}

namespace {

void text_trace(const RetrieverModel& model, std::string_view text, SegmentTrace& out) {
  const auto tokens = pseudo_tokens(text);
  if (tokens.empty()) throw DataError("encode_text_segment: empty text");
  out.audio = false;
  out.vec.assign(model.dims.d, 0.0);
  out.buckets.clear();
  for (const auto& t : tokens) {
    const auto b = word_bucket(t, model.dims.vocab_buckets);
    out.buckets.push_back(b);
    const auto row = model.text_table.row(b);
    for (std::size_t j = 0; j < row.size(); ++j) out.vec[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (auto& v : out.vec) v *= inv;
}

std::vector<double> mean_rows(const FrameMatrix& frames) {
  std::vector<double> mean(frames.cols(), 0.0);
  for (std::size_t r = 0; r < frames.rows(); ++r) {
    const auto row = frames.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) mean[j] += static_cast<double>(row[j]);
  }
  const double inv = 1.0 / static_cast<double>(frames.rows());
  for (auto& v : mean) v *= inv;
  return mean;
}

FrameMatrix reduce_frames(const RetrieverModel& model, const FrameMatrix& frames, const AudioFrontEnd& fe) {
  switch (fe.kind) {
    case AudioFrontEnd::Kind::AllFrames: return frames;
    case AudioFrontEnd::Kind::Selector: return selector::filter_frames(model.selector, frames).kept;
    case AudioFrontEnd::Kind::Pool: return pool_audio_kway(frames, fe.pool_k);
  }
  return frames;
}

void audio_trace(const RetrieverModel& model, const Segment& segment, const AudioFrontEnd& fe, SegmentTrace& out) {
  if (!segment.is_audio()) throw DataError("encode_audio_segment: not an audio segment");
  if (segment.frames.cols() != model.dims.frame_dim) {
    throw DataError("encode_audio_segment: frame_dim " + std::to_string(segment.frames.cols()) +
                    " != model frame_dim " + std::to_string(model.dims.frame_dim));
  }
  if (segment.frames.rows() == 0) throw DataError("encode_audio_segment: no frames");
  out.audio = true;
  if (fe.kind == AudioFrontEnd::Kind::AllFrames) {
    out.frame_mean = mean_rows(segment.frames);
  } else {
    out.frame_mean = mean_rows(reduce_frames(model, segment.frames, fe));
  }
  out.vec.assign(model.dims.d, 0.0);
  for (std::size_t k = 0; k < out.frame_mean.size(); ++k) {
    const double f = out.frame_mean[k];
    const auto row = model.audio_proj.row(k);
    for (std::size_t j = 0; j < row.size(); ++j) out.vec[j] += f * row[j];
  }
}

}  // namespace

std::vector<double> encode_text_segment(const RetrieverModel& model, std::string_view text) {
  SegmentTrace t;
  text_trace(model, text, t);
  return std::move(t.vec);
}

std::vector<double> encode_audio_segment(const RetrieverModel& model, const Segment& segment,
                                         const AudioFrontEnd& front_end) {
  SegmentTrace t;
  audio_trace(model, segment, front_end, t);
  return std::move(t.vec);
}

EncodeTrace encode_with_trace(const RetrieverModel& model, const InterleavedSequence& seq,
                              const AudioFrontEnd& front_end) {
  if (seq.segments.empty()) throw DataError("encode_sequence: empty sequence '" + seq.id + "'");
  if (seq.segments.size() > model.dims.max_segments) {
    throw DataError("encode_sequence: '" + seq.id + "' has " + std::to_string(seq.segments.size()) +
                    " segments, model supports " + std::to_string(model.dims.max_segments));
  }
  const std::size_t d = model.dims.d;
  EncodeTrace tr;
  tr.segments.resize(seq.segments.size());
  tr.pooled.assign(d, 0.0);
  for (std::size_t i = 0; i < seq.segments.size(); ++i) {
    const auto& s = seq.segments[i];
    if (s.is_text()) text_trace(model, s.text, tr.segments[i]);
    else audio_trace(model, s, front_end, tr.segments[i]);
    const auto gate = model.gates.row(i);
    for (std::size_t j = 0; j < d; ++j) tr.pooled[j] += tr.segments[i].vec[j] * gate[j];
  }
  const double inv = 1.0 / static_cast<double>(seq.segments.size());
  for (auto& v : tr.pooled) v *= inv;

  tr.projected.assign(model.dims.d_out, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    const double m = tr.pooled[a];
    const auto row = model.fusion.row(a);
    for (std::size_t b = 0; b < row.size(); ++b) tr.projected[b] += m * row[b];
  }
  tr.norm = l2_norm(tr.projected);
  if (!std::isfinite(tr.norm)) throw NumericError("encode_sequence: non-finite activations for '" + seq.id + "'");
  tr.embedding.assign(model.dims.d_out, 0.0);
  if (tr.norm > 0.0) {
    for (std::size_t b = 0; b < tr.embedding.size(); ++b) tr.embedding[b] = tr.projected[b] / tr.norm;
  } else {
    tr.embedding[0] = 1.0;
  }
  return tr;
}

Embedding encode_sequence(const RetrieverModel& model, const InterleavedSequence& seq, const AudioFrontEnd& front_end) {
  return encode_with_trace(model, seq, front_end).embedding;
}

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("similarity: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  return dot(a, b);
}

FrameMatrix pool_audio_kway(const FrameMatrix& frames, std::size_t k) {
  if (k == 0) throw ConfigError("pool_audio_kway: k must be positive");
  if (frames.rows() == 0) throw DataError("pool_audio_kway: no frames");
  const std::size_t n = frames.rows();
  if (n <= k) return frames;
  FrameMatrix out(0, frames.cols());
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t start = 0;
  std::vector<double> acc(frames.cols());
  std::vector<float> row(frames.cols());
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t r = start; r < start + len; ++r) {
      const auto fr = frames.row(r);
      for (std::size_t j = 0; j < fr.size(); ++j) acc[j] += static_cast<double>(fr[j]);
    }
    for (std::size_t j = 0; j < acc.size(); ++j) row[j] = static_cast<float>(acc[j] / static_cast<double>(len));
    out.append_row(row);
    start += len;
  }
  return out;
}

std::size_t processed_frames(const RetrieverModel& model, const InterleavedSequence& seq,
                             const AudioFrontEnd& front_end) {
  std::size_t total = 0;
  for (const auto& s : seq.segments) {
    if (!s.is_audio()) continue;
    switch (front_end.kind) {
      case AudioFrontEnd::Kind::AllFrames: total += s.num_frames(); break;
      case AudioFrontEnd::Kind::Selector:
        total += selector::select_frame_indices(model.selector, s.frames).size();
        break;
      case AudioFrontEnd::Kind::Pool: total += std::min(s.num_frames(), front_end.pool_k); break;
    }
  }
  return total;
}

// --- gradients ---------------------------------------------------------------

Gradients Gradients::zeros_like(const RetrieverModel& model) {
  Gradients g;
  g.text_cols = model.text_table.cols();
  g.audio_proj = Matrix<double>(model.audio_proj.rows(), model.audio_proj.cols());
  g.fusion = Matrix<double>(model.fusion.rows(), model.fusion.cols());
  return g;
}

std::vector<double>& Gradients::text_row(std::size_t row) {
  auto it = text_rows.find(row);
  if (it == text_rows.end()) it = text_rows.emplace(row, std::vector<double>(text_cols, 0.0)).first;
  return it->second;
}

Matrix<double> Gradients::text_table_dense(std::size_t vocab_buckets) const {
  Matrix<double> out(vocab_buckets, text_cols);
  for (const auto& [r, g] : text_rows) std::copy(g.begin(), g.end(), out.row(r).begin());
  return out;
}

void Gradients::scale(double factor) {
  for (auto& [r, g] : text_rows) {
    for (auto& v : g) v *= factor;
  }
  for (auto* m : {&audio_proj, &fusion}) {
    for (auto& v : m->data()) v *= factor;
  }
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& [r, g] : text_rows) {
    for (double v : g) s += v * v;
  }
  for (const auto* m : {&audio_proj, &fusion}) {
    for (double v : m->data()) s += v * v;
  }
  return s;
}

void backprop_embedding(const RetrieverModel& model, const EncodeTrace& trace, std::span<const double> d_embedding,
                        Gradients& grads) {
  if (!(trace.norm > 0.0) || !std::isfinite(trace.norm)) return;  // constant e1 fallback
  const std::size_t d = model.dims.d;
  const std::size_t d_out = model.dims.d_out;

  // Through L2 normalisation: dz = (g - (g.u) u) / |z|.
  const double gu = dot(d_embedding, trace.embedding);
  std::vector<double> dz(d_out);
  for (std::size_t b = 0; b < d_out; ++b) dz[b] = (d_embedding[b] - gu * trace.embedding[b]) / trace.norm;

  // z = m W_f
  std::vector<double> dm(d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    const double m = trace.pooled[a];
    auto grow = grads.fusion.row(a);
    const auto wrow = model.fusion.row(a);
    double acc = 0.0;
    for (std::size_t b = 0; b < d_out; ++b) {
      grow[b] += m * dz[b];
      acc += wrow[b] * dz[b];
    }
    dm[a] = acc;
  }

  // m = (1/n) sum_i e_i * gate_i
  const double inv_n = 1.0 / static_cast<double>(trace.segments.size());
  std::vector<double> de(d);
  for (std::size_t i = 0; i < trace.segments.size(); ++i) {
    const auto& seg = trace.segments[i];
    const auto gate = model.gates.row(i);
    for (std::size_t j = 0; j < d; ++j) de[j] = dm[j] * gate[j] * inv_n;
    if (seg.audio) {
      for (std::size_t k = 0; k < seg.frame_mean.size(); ++k) {
        const double f = seg.frame_mean[k];
        if (f == 0.0) continue;
        auto grow = grads.audio_proj.row(k);
        for (std::size_t j = 0; j < d; ++j) grow[j] += f * de[j];
      }
    } else {
      const double inv_t = 1.0 / static_cast<double>(seg.buckets.size());
      for (auto b : seg.buckets) {
        auto& grow = grads.text_row(b);
        for (std::size_t j = 0; j < d; ++j) grow[j] += de[j] * inv_t;
      }
    }
  }
}

// --- checkpoints ---------------------------------------------------------------

std::string checkpoint_to_json(const RetrieverModel& model) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["dims"] = {{"vocab_buckets", model.dims.vocab_buckets},
               {"d", model.dims.d},
               {"d_out", model.dims.d_out},
               {"frame_dim", model.dims.frame_dim},
               {"max_segments", model.dims.max_segments}};
  j["tau"] = model.tau;
  j["text_table"] = model.text_table.data();
  j["audio_proj"] = model.audio_proj.data();
  j["fusion"] = model.fusion.data();
  j["gates"] = model.gates.data();
  j["selector"] = nlohmann::json::parse(selector::selector_to_json(model.selector));
  return j.dump();
}

RetrieverModel checkpoint_from_json(const std::string& text) {
  RetrieverModel m;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw DataError("checkpoint: unsupported format_version");
    }
    const auto& jd = j.at("dims");
    m.dims.vocab_buckets = jd.at("vocab_buckets").get<std::size_t>();
    m.dims.d = jd.at("d").get<std::size_t>();
    m.dims.d_out = jd.at("d_out").get<std::size_t>();
    m.dims.frame_dim = jd.at("frame_dim").get<std::size_t>();
    m.dims.max_segments = jd.at("max_segments").get<std::size_t>();
    m.tau = j.at("tau").get<double>();
    auto load = [&](const char* key, std::size_t rows, std::size_t cols) {
      auto flat = j.at(key).get<std::vector<double>>();
      if (flat.size() != rows * cols) throw DataError(std::string("checkpoint: '") + key + "' has wrong size");
      Matrix<double> out(rows, cols);
      out.data() = std::move(flat);
      return out;
    };
    m.text_table = load("text_table", m.dims.vocab_buckets, m.dims.d);
    m.audio_proj = load("audio_proj", m.dims.frame_dim, m.dims.d);
    m.fusion = load("fusion", m.dims.d, m.dims.d_out);
    m.gates = load("gates", m.dims.max_segments, m.dims.d);
    m.selector = selector::selector_from_json(j.at("selector").dump());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return m;
}

void save_checkpoint(const RetrieverModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << checkpoint_to_json(model) << '\n';
  if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
}

RetrieverModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

uint64_t model_fingerprint(const RetrieverModel& model) {
  // FNV-1a over the little-endian bytes of every value, chained block by block.
  uint64_t h = 0xcbf29ce484222325ULL;
  auto feed_u64 = [&](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  auto feed = [&](double v) { feed_u64(std::bit_cast<uint64_t>(v)); };
  feed_u64(static_cast<uint64_t>(kCheckpointFormatVersion));
  for (auto v : {model.dims.vocab_buckets, model.dims.d, model.dims.d_out, model.dims.frame_dim,
                 model.dims.max_segments}) {
    feed_u64(v);
  }
  feed(model.tau);
  for (const auto* m : {&model.text_table, &model.audio_proj, &model.fusion}) {
    for (double v : m->data()) feed(v);
  }
  for (double v : model.selector.weights) feed(v);
  feed(model.selector.bias);
  feed(model.selector.threshold);
  feed_u64(model.selector.min_keep);
  return h;
}

}  // namespace atir::encoder
