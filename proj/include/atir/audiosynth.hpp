#pragma once

// Deterministic desk-scale dataset generation: pseudo-audio frames derived
// from text, salient-span ground truth, acoustic environments, and the
// corpus -> QA -> self-evaluation pipeline around a pluggable generator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "atir/core.hpp"

namespace atir::audiosynth {

enum class EnvironmentKind { Clean = 0, BackgroundSpeech = 1, Traffic = 2, Media = 3 };
inline constexpr std::array<EnvironmentKind, 4> kAllEnvironments = {
    EnvironmentKind::Clean, EnvironmentKind::BackgroundSpeech, EnvironmentKind::Traffic, EnvironmentKind::Media};

std::string to_string(EnvironmentKind env);

struct SynthConfig {
  uint64_t seed = 7;
  std::size_t frame_dim = kDefaultFrameDim;
  /// Fraction of all frames in a segment that are filler (non-salient).
  double filler_ratio = 0.5;
  /// Structured noise magnitude per environment, indexed by EnvironmentKind.
  std::array<double, 4> noise_scale = {0.0, 0.15, 0.2, 0.15};
  /// Upper bound on the norm of a filler frame before environment noise.
  double noise_floor = 0.3;
  /// Share of a filler frame's norm placed on feature 0 with negative sign
  /// (a low-energy marker); content codes keep feature 0 >= 0.
  double silence_level = 0.8;
  std::size_t frames_per_token = 2;

  // Shape of the generated text.
  std::size_t n_topics = 50;
  std::size_t words_per_topic = 12;
  std::size_t entity_vocab = 1500;
  std::size_t passages_per_doc = 3;
  std::size_t keywords_per_passage = 3;
  std::size_t topic_words_per_passage = 2;
  std::size_t keywords_per_turn = 2;
  /// Self-evaluation floor on query/positive pseudo-token Jaccard overlap.
  double min_jaccard = 0.2;

  /// Throws ConfigError.
  void validate() const;
};

enum class ExpansionMode { CrossDomain = 0, Comparative = 1, Illustrative = 2, Reasoning = 3 };

/// Expands source content from one perspective. Implementations must be
/// deterministic in (their seed, text, mode).
class GeneratorClient {
 public:
  virtual ~GeneratorClient() = default;
  virtual std::string expand(std::string_view text, ExpansionMode mode) const = 0;
};

/// Default generator: source words plus a few mode-specific template words,
/// in a seeded order.
class TemplateExpander final : public GeneratorClient {
 public:
  explicit TemplateExpander(uint64_t seed, std::size_t template_words = 3)
      : seed_(seed), template_words_(template_words) {}
  std::string expand(std::string_view text, ExpansionMode mode) const override;

 private:
  uint64_t seed_;
  std::size_t template_words_;
};

/// Unit-norm acoustic code of one pseudo-token, feature 0 folded to be
/// non-negative. Depends only on (word, cfg.seed, frame_dim).
std::vector<float> token_code(std::string_view word, const SynthConfig& cfg);

/// Renders text as a pseudo-audio segment. Content frames repeat each token's
/// code frames_per_token times; seeded filler frames fill the gaps before,
/// between and after tokens; spans cover exactly the content frames; the
/// environment adds structured noise. `salt` decorrelates the noise of
/// segments sharing the same text.
Segment featurize_text_as_audio(std::string_view text, EnvironmentKind env, const SynthConfig& cfg,
                                uint64_t salt = 0);

/// Environment used when projecting segment `index` of sequence `id`.
EnvironmentKind environment_for(const SynthConfig& cfg, std::string_view id, std::size_t index);

/// Replaces every audio segment with its transcript as text.
InterleavedSequence project_to_text(const InterleavedSequence& seq);
/// Renders every text segment as pseudo-audio; audio segments pass through.
InterleavedSequence project_to_audio(const InterleavedSequence& seq, const SynthConfig& cfg);

struct BenchmarkSize {
  std::size_t n_docs = 10;
  std::size_t n_queries = 5;
  double turns_per_query = 2.0;
  /// Training queries on documents no evaluation query uses; they cycle over
  /// those documents when there are more queries than documents.
  std::size_t n_train_queries = 0;
};

struct SyntheticBenchmark {
  SynthConfig config;
  Corpus corpus;
  std::vector<InterleavedSequence> queries;
  Qrels qrels;
  std::vector<InterleavedSequence> train_queries;
  Qrels train_qrels;
  /// Acoustic environment of every document's audio.
  std::map<std::string, EnvironmentKind> environments;
  /// Queries removed by the self-evaluation pass.
  std::size_t dropped_queries = 0;
};

/// Corpus generation, question construction and rule-based self-evaluation.
/// `generator` == nullptr uses a TemplateExpander seeded from cfg.seed.
/// Output is identical for any worker count.
SyntheticBenchmark build_synthetic_benchmark(const SynthConfig& cfg, const BenchmarkSize& size,
                                             const GeneratorClient* generator = nullptr,
                                             std::size_t workers = 1);

/// Jaccard overlap of the two sequences' pseudo-token sets (audio segments
/// contribute their transcripts).
double token_jaccard(const InterleavedSequence& a, const InterleavedSequence& b);

/// Parses `key = value` lines (comments with '#') into a config.
SynthConfig parse_synth_config(const std::map<std::string, std::string>& kv, SynthConfig base = {});

}  // namespace atir::audiosynth
