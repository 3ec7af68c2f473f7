#include "atir/audiosynth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "atir/error.hpp"
#include "atir/util.hpp"

namespace atir::audiosynth {

namespace {

constexpr std::array<const char*, 16> kSyllables = {"ka", "lo", "mi", "ru", "se", "po", "ni", "vu",
                                                    "de", "fa", "gi", "zo", "be", "xu", "ha", "ty"};

const std::array<std::vector<std::string>, 4>& template_pools() {
  static const std::array<std::vector<std::string>, 4> pools = {
      std::vector<std::string>{"history", "culture", "tradition", "society", "industry", "heritage", "application",
                               "practice"},
      std::vector<std::string>{"compared", "similar", "unlike", "analogy", "contrast", "versus", "resembles",
                               "differs"},
      std::vector<std::string>{"example", "scenario", "imagine", "instance", "everyday", "story", "case", "picture"},
      std::vector<std::string>{"therefore", "because", "implies", "infer", "consequence", "reason", "thus",
                               "evolves"},
  };
  return pools;
}

const std::vector<std::string>& question_stems() {
  static const std::vector<std::string> stems = {"what", "where", "who",  "how",     "why",
                                                 "which", "when", "tell", "explain", "describe"};
  return stems;
}

std::string syllable_word(std::size_t index) {
  std::string w;
  w += kSyllables[index % 16];
  w += kSyllables[(index / 16) % 16];
  w += kSyllables[(index / 256) % 16];
  return w;
}

std::string entity_word(std::size_t index) { return syllable_word(index); }

std::string topic_word(std::size_t topic, std::size_t j, const SynthConfig& cfg) {
  // Trailing 'n' keeps topic words disjoint from entity words.
  return syllable_word(topic * cfg.words_per_topic + j) + "n";
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::vector<double> unit_gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  double norm = 0.0;
  do {
    for (auto& x : v) x = normal(rng);
    norm = l2_norm(v);
  } while (norm == 0.0);
  for (auto& x : v) x /= norm;
  return v;
}

std::vector<double> environment_base(const SynthConfig& cfg, EnvironmentKind env) {
  std::mt19937_64 rng(mix_seed(cfg.seed ^ 0xe17c0de5ULL, static_cast<uint64_t>(env)));
  return unit_gaussian(rng, cfg.frame_dim);
}

std::set<std::string> token_set(const InterleavedSequence& seq) {
  std::set<std::string> out;
  for (const auto& s : seq.segments) {
    const std::string& text = s.is_text() ? s.text : (s.transcript ? *s.transcript : std::string());
    for (auto& t : pseudo_tokens(text)) out.insert(std::move(t));
  }
  return out;
}

}  // namespace

std::string to_string(EnvironmentKind env) {
  switch (env) {
    case EnvironmentKind::Clean: return "clean";
    case EnvironmentKind::BackgroundSpeech: return "background_speech";
    case EnvironmentKind::Traffic: return "traffic";
    case EnvironmentKind::Media: return "media";
  }
  return "unknown";
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("synth config: " + what); };
  if (frame_dim < 2) fail("frame_dim must be >= 2");
  if (!(filler_ratio >= 0.0 && filler_ratio < 1.0)) fail("filler_ratio must lie in [0, 1)");
  for (double s : noise_scale) {
    if (!(s >= 0.0) || !std::isfinite(s)) fail("noise_scale entries must be finite and >= 0");
  }
  if (!(noise_floor >= 0.0) || !std::isfinite(noise_floor)) fail("noise_floor must be finite and >= 0");
  if (!(silence_level > 0.0 && silence_level < 1.0)) fail("silence_level must lie in (0, 1)");
  if (frames_per_token == 0) fail("frames_per_token must be positive");
  if (n_topics == 0 || words_per_topic == 0 || entity_vocab == 0) fail("vocabulary sizes must be positive");
  if (n_topics * words_per_topic > 4096 || entity_vocab > 4096) fail("vocabulary exceeds 4096 pseudo-words");
  if (passages_per_doc == 0 || keywords_per_passage == 0) fail("document shape must be positive");
  if (topic_words_per_passage > words_per_topic) fail("topic_words_per_passage exceeds words_per_topic");
  if (passages_per_doc * keywords_per_passage > entity_vocab) fail("entity_vocab too small for one document");
  if (keywords_per_turn == 0 || keywords_per_turn > keywords_per_passage) {
    fail("keywords_per_turn must lie in [1, keywords_per_passage]");
  }
  if (!(min_jaccard >= 0.0 && min_jaccard <= 1.0)) fail("min_jaccard must lie in [0, 1]");
}

std::string TemplateExpander::expand(std::string_view text, ExpansionMode mode) const {
  auto words = pseudo_tokens(text);
  if (words.empty()) throw DataError("generator: empty source content");
  std::mt19937_64 rng(mix_seed(seed_ ^ fnv1a64(text), static_cast<uint64_t>(mode)));
  const auto& pool = template_pools()[static_cast<std::size_t>(mode)];
  std::vector<std::size_t> picks(pool.size());
  std::iota(picks.begin(), picks.end(), 0);
  std::shuffle(picks.begin(), picks.end(), rng);
  for (std::size_t i = 0; i < std::min(template_words_, pool.size()); ++i) words.push_back(pool[picks[i]]);
  std::shuffle(words.begin(), words.end(), rng);
  return join(words);
}

std::vector<float> token_code(std::string_view word, const SynthConfig& cfg) {
  std::mt19937_64 rng(mix_seed(cfg.seed, fnv1a64(word)));
  auto dir = unit_gaussian(rng, cfg.frame_dim);
  dir[0] = std::abs(dir[0]);
  return std::vector<float>(dir.begin(), dir.end());
}

Segment featurize_text_as_audio(std::string_view text, EnvironmentKind env, const SynthConfig& cfg, uint64_t salt) {
  cfg.validate();
  const auto tokens = pseudo_tokens(text);
  if (tokens.empty()) throw DataError("featurize_text_as_audio: empty text");

  std::mt19937_64 rng(mix_seed(cfg.seed ^ fnv1a64(text), salt ^ (static_cast<uint64_t>(env) << 56)));
  const std::size_t n_content = tokens.size() * cfg.frames_per_token;
  const auto n_filler = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_content) * cfg.filler_ratio / (1.0 - cfg.filler_ratio)));

  // Filler frames go into the gaps before, between and after tokens.
  std::vector<std::size_t> gap_fill(tokens.size() + 1, 0);
  std::uniform_int_distribution<std::size_t> gap_pick(0, tokens.size());
  for (std::size_t i = 0; i < n_filler; ++i) ++gap_fill[gap_pick(rng)];

  const std::size_t dim = cfg.frame_dim;
  std::uniform_real_distribution<double> filler_scale(0.5, 1.0);
  FrameMatrix frames;
  std::vector<bool> is_content;
  std::vector<float> row(dim);
  auto push_filler = [&] {
    auto g = unit_gaussian(rng, dim - 1);
    const double scale = cfg.noise_floor * filler_scale(rng);
    const double spread = scale * std::sqrt(1.0 - cfg.silence_level * cfg.silence_level);
    row[0] = static_cast<float>(-cfg.silence_level * scale);
    for (std::size_t i = 1; i < dim; ++i) row[i] = static_cast<float>(spread * g[i - 1]);
    frames.append_row(row);
    is_content.push_back(false);
  };
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    for (std::size_t k = 0; k < gap_fill[t]; ++k) push_filler();
    const auto code = token_code(tokens[t], cfg);
    for (std::size_t k = 0; k < cfg.frames_per_token; ++k) {
      frames.append_row(code);
      is_content.push_back(true);
    }
  }
  for (std::size_t k = 0; k < gap_fill.back(); ++k) push_filler();

  const double scale = cfg.noise_scale[static_cast<std::size_t>(env)];
  if (scale > 0.0) {
    const auto base = environment_base(cfg, env);
    for (std::size_t r = 0; r < frames.rows(); ++r) {
      auto jitter = unit_gaussian(rng, dim);
      std::vector<double> v(dim);
      for (std::size_t i = 0; i < dim; ++i) v[i] = base[i] + 0.5 * jitter[i];
      auto fr = frames.row(r);
      if (is_content[r]) {
        // Keep the noise orthogonal to the token code so content frames stay
        // at norm >= 1.
        double proj = 0.0;
        for (std::size_t i = 0; i < dim; ++i) proj += v[i] * fr[i];
        for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * fr[i];
      }
      const double n = l2_norm(v);
      if (n == 0.0) continue;
      for (std::size_t i = 0; i < dim; ++i) fr[i] = static_cast<float>(fr[i] + scale * v[i] / n);
    }
  }

  std::vector<SpanAnnotation> spans;
  for (std::size_t r = 0; r < is_content.size();) {
    if (!is_content[r]) {
      ++r;
      continue;
    }
    std::size_t end = r;
    while (end < is_content.size() && is_content[end]) ++end;
    spans.push_back({static_cast<int64_t>(r) * kFrameMs, static_cast<int64_t>(end) * kFrameMs});
    r = end;
  }
  return Segment::make_audio(std::move(frames), std::move(spans), std::string(text));
}

EnvironmentKind environment_for(const SynthConfig& cfg, std::string_view id, std::size_t index) {
  return static_cast<EnvironmentKind>(mix_seed(cfg.seed ^ fnv1a64(id), index) % 4);
}

InterleavedSequence project_to_text(const InterleavedSequence& seq) {
  InterleavedSequence out;
  out.id = seq.id;
  for (const auto& s : seq.segments) {
    if (s.is_text()) {
      out.segments.push_back(s);
    } else {
      if (!s.transcript || s.transcript->empty()) {
        throw DataError("project_to_text: audio segment without transcript in '" + seq.id + "'");
      }
      out.segments.push_back(Segment::make_text(*s.transcript));
    }
  }
  return out;
}

InterleavedSequence project_to_audio(const InterleavedSequence& seq, const SynthConfig& cfg) {
  InterleavedSequence out;
  out.id = seq.id;
  for (std::size_t i = 0; i < seq.segments.size(); ++i) {
    const auto& s = seq.segments[i];
    if (s.is_audio()) {
      out.segments.push_back(s);
    } else {
      out.segments.push_back(
          featurize_text_as_audio(s.text, environment_for(cfg, seq.id, i), cfg, mix_seed(fnv1a64(seq.id), i)));
    }
  }
  return out;
}

double token_jaccard(const InterleavedSequence& a, const InterleavedSequence& b) {
  const auto sa = token_set(a);
  const auto sb = token_set(b);
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

namespace {

struct DocPlan {
  std::size_t topic = 0;
  std::vector<std::vector<std::string>> passage_keywords;
  std::vector<std::vector<std::string>> passage_topic_words;
};

std::string doc_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "d%05zu", i);
  return buf;
}

std::string query_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05zu", prefix, i);
  return buf;
}

DocPlan plan_document(const SynthConfig& cfg, std::size_t index) {
  std::mt19937_64 rng(mix_seed(cfg.seed, index));
  DocPlan plan;
  plan.topic = std::uniform_int_distribution<std::size_t>(0, cfg.n_topics - 1)(rng);

  std::vector<std::size_t> entity(cfg.entity_vocab);
  std::iota(entity.begin(), entity.end(), 0);
  // Partial Fisher-Yates: only the needed prefix.
  const std::size_t need = cfg.passages_per_doc * cfg.keywords_per_passage;
  for (std::size_t i = 0; i < need; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, entity.size() - 1);
    std::swap(entity[i], entity[pick(rng)]);
  }
  std::vector<std::size_t> topic_slots(cfg.words_per_topic);
  std::iota(topic_slots.begin(), topic_slots.end(), 0);
  for (std::size_t p = 0; p < cfg.passages_per_doc; ++p) {
    std::vector<std::string> kws;
    for (std::size_t k = 0; k < cfg.keywords_per_passage; ++k) {
      kws.push_back(entity_word(entity[p * cfg.keywords_per_passage + k]));
    }
    std::shuffle(topic_slots.begin(), topic_slots.end(), rng);
    std::vector<std::string> tws;
    for (std::size_t k = 0; k < cfg.topic_words_per_passage; ++k) {
      tws.push_back(topic_word(plan.topic, topic_slots[k], cfg));
    }
    plan.passage_keywords.push_back(std::move(kws));
    plan.passage_topic_words.push_back(std::move(tws));
  }
  return plan;
}

InterleavedSequence render_document(const SynthConfig& cfg, std::size_t index, const DocPlan& plan,
                                    const GeneratorClient& generator) {
  std::mt19937_64 rng(mix_seed(cfg.seed ^ 0xd0c5ULL, index));
  const auto env = static_cast<EnvironmentKind>(index % 4);
  const std::size_t audio_parity = std::uniform_int_distribution<std::size_t>(0, 1)(rng);
  InterleavedSequence doc;
  doc.id = doc_id(index);
  for (std::size_t p = 0; p < cfg.passages_per_doc; ++p) {
    std::vector<std::string> source = plan.passage_topic_words[p];
    source.insert(source.end(), plan.passage_keywords[p].begin(), plan.passage_keywords[p].end());
    const auto mode = static_cast<ExpansionMode>((index + p) % 4);
    std::string text = generator.expand(join(source), mode);
    if (p % 2 == audio_parity) {
      doc.segments.push_back(featurize_text_as_audio(text, env, cfg, mix_seed(fnv1a64(doc.id), p)));
    } else {
      doc.segments.push_back(Segment::make_text(std::move(text)));
    }
  }
  return doc;
}

InterleavedSequence render_query(const SynthConfig& cfg, const std::string& id, uint64_t query_seed,
                                 std::size_t n_turns, const DocPlan& plan) {
  std::mt19937_64 rng(query_seed);
  const auto& stems = question_stems();
  const std::size_t audio_parity = std::uniform_int_distribution<std::size_t>(0, 1)(rng);
  const auto env = static_cast<EnvironmentKind>(std::uniform_int_distribution<int>(0, 3)(rng));
  InterleavedSequence q;
  q.id = id;
  for (std::size_t t = 0; t < n_turns; ++t) {
    const std::size_t p = t % plan.passage_keywords.size();
    std::vector<std::string> kws = plan.passage_keywords[p];
    std::shuffle(kws.begin(), kws.end(), rng);
    kws.resize(cfg.keywords_per_turn);
    std::vector<std::string> words = {stems[std::uniform_int_distribution<std::size_t>(0, stems.size() - 1)(rng)]};
    words.insert(words.end(), kws.begin(), kws.end());
    const auto& tws = plan.passage_topic_words[p];
    if (!tws.empty()) words.push_back(tws[std::uniform_int_distribution<std::size_t>(0, tws.size() - 1)(rng)]);
    std::shuffle(words.begin() + 1, words.end(), rng);
    std::string text = join(words);
    if (t % 2 == audio_parity) {
      q.segments.push_back(featurize_text_as_audio(text, env, cfg, mix_seed(fnv1a64(id), t)));
    } else {
      q.segments.push_back(Segment::make_text(std::move(text)));
    }
  }
  return q;
}

std::size_t sample_turns(std::mt19937_64& rng, double turns_per_query, std::size_t max_turns) {
  const double base = std::floor(turns_per_query);
  const double frac = turns_per_query - base;
  std::size_t n = static_cast<std::size_t>(base);
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < frac) ++n;
  return std::clamp<std::size_t>(n, 1, max_turns);
}

}  // namespace

SyntheticBenchmark build_synthetic_benchmark(const SynthConfig& cfg, const BenchmarkSize& size,
                                             const GeneratorClient* generator, std::size_t workers) {
  cfg.validate();
  if (size.n_queries > size.n_docs) throw ConfigError("build_synthetic_benchmark: n_queries exceeds n_docs");
  if (size.n_train_queries > 0 && size.n_queries == size.n_docs) {
    throw ConfigError("build_synthetic_benchmark: no documents left for training queries");
  }
  if (!(size.turns_per_query >= 1.0)) throw ConfigError("build_synthetic_benchmark: turns_per_query must be >= 1");
  TemplateExpander default_generator(cfg.seed);
  const GeneratorClient& gen = generator ? *generator : default_generator;

  SyntheticBenchmark bench;
  bench.config = cfg;
  bench.corpus = Corpus(cfg.frame_dim);

  // Corpus generation: every document owns a sub-seed, so slots can be
  // filled in any order.
  std::vector<DocPlan> plans(size.n_docs);
  std::vector<InterleavedSequence> docs(size.n_docs);
  parallel_for(size.n_docs, workers, [&](std::size_t i) {
    plans[i] = plan_document(cfg, i);
    docs[i] = render_document(cfg, i, plans[i], gen);
  });
  for (std::size_t i = 0; i < size.n_docs; ++i) {
    bench.environments[docs[i].id] = static_cast<EnvironmentKind>(i % 4);
    bench.corpus.add(std::move(docs[i]));
  }

  // Question construction: each query is grounded in exactly one document.
  std::vector<std::size_t> order(size.n_docs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(mix_seed(cfg.seed, 0x5117ULL));
  std::shuffle(order.begin(), order.end(), split_rng);

  const std::size_t total_queries = size.n_queries + size.n_train_queries;
  // Training queries cycle over the documents no test query uses.
  auto source_doc = [&](std::size_t j) {
    return j < size.n_queries ? j : size.n_queries + (j - size.n_queries) % (size.n_docs - size.n_queries);
  };
  std::vector<InterleavedSequence> queries(total_queries);
  parallel_for(total_queries, workers, [&](std::size_t j) {
    const bool train = j >= size.n_queries;
    const std::size_t local = train ? j - size.n_queries : j;
    const std::string id = query_id(train ? "tq" : "q", local);
    const uint64_t qseed = mix_seed(cfg.seed ^ (train ? 0x7a11ULL : 0x7e57ULL), local);
    std::mt19937_64 rng(qseed);
    const std::size_t turns = sample_turns(rng, size.turns_per_query, cfg.passages_per_doc);
    queries[j] = render_query(cfg, id, mix_seed(qseed, 1), turns, plans[order[source_doc(j)]]);
  });

  // Self-evaluation: structural invariants plus a lexical grounding floor.
  for (std::size_t j = 0; j < total_queries; ++j) {
    const bool train = j >= size.n_queries;
    const auto& positive = bench.corpus[order[source_doc(j)]];
    bool ok = true;
    try {
      validate_sequence(queries[j], cfg.frame_dim);
    } catch (const DataError&) {
      ok = false;
    }
    if (ok && token_jaccard(queries[j], positive) < cfg.min_jaccard) ok = false;
    if (!ok) {
      ++bench.dropped_queries;
      continue;
    }
    auto& qrels = train ? bench.train_qrels : bench.qrels;
    qrels.set(queries[j].id, positive.id, 1);
    (train ? bench.train_queries : bench.queries).push_back(std::move(queries[j]));
  }
  return bench;
}

SynthConfig parse_synth_config(const std::map<std::string, std::string>& kv, SynthConfig cfg) {
  auto as_double = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("synth config: '" + key + "' expects a real, got '" + v + "'");
    }
  };
  auto as_size = [&](const std::string& key, const std::string& v) {
    const double d = as_double(key, v);
    if (d < 0 || d != std::floor(d)) throw ConfigError("synth config: '" + key + "' expects a non-negative integer");
    return static_cast<std::size_t>(d);
  };
  for (const auto& [key, value] : kv) {
    if (key == "seed") cfg.seed = static_cast<uint64_t>(as_size(key, value));
    else if (key == "frame_dim") cfg.frame_dim = as_size(key, value);
    else if (key == "filler_ratio") cfg.filler_ratio = as_double(key, value);
    else if (key == "noise_scale.clean") cfg.noise_scale[0] = as_double(key, value);
    else if (key == "noise_scale.background_speech") cfg.noise_scale[1] = as_double(key, value);
    else if (key == "noise_scale.traffic") cfg.noise_scale[2] = as_double(key, value);
    else if (key == "noise_scale.media") cfg.noise_scale[3] = as_double(key, value);
    else if (key == "noise_floor") cfg.noise_floor = as_double(key, value);
    else if (key == "silence_level") cfg.silence_level = as_double(key, value);
    else if (key == "frames_per_token") cfg.frames_per_token = as_size(key, value);
    else if (key == "n_topics") cfg.n_topics = as_size(key, value);
    else if (key == "words_per_topic") cfg.words_per_topic = as_size(key, value);
    else if (key == "entity_vocab") cfg.entity_vocab = as_size(key, value);
    else if (key == "passages_per_doc") cfg.passages_per_doc = as_size(key, value);
    else if (key == "keywords_per_passage") cfg.keywords_per_passage = as_size(key, value);
    else if (key == "topic_words_per_passage") cfg.topic_words_per_passage = as_size(key, value);
    else if (key == "keywords_per_turn") cfg.keywords_per_turn = as_size(key, value);
    else if (key == "min_jaccard") cfg.min_jaccard = as_double(key, value);
    else throw ConfigError("synth config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

}  // namespace atir::audiosynth
