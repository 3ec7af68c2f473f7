#pragma once

// Evaluation: Recall@k / nDCG@k, the four retrieval settings, interleaving
// perturbations, selector-vs-pooling, component ablations, an ASR channel
// baseline and embedding latency. Reports render as TSV and aligned text.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atir/audiosynth.hpp"
#include "atir/core.hpp"
#include "atir/encoder.hpp"
#include "atir/pipeline.hpp"
#include "atir/retrieval.hpp"

namespace atir::evalx {

// --- metrics ----------------------------------------------------------------

/// 1 when a doc with grade >= 1 appears in the top k, else 0. Throws
/// DataError when the query has no judgments or no positive, ConfigError on
/// k == 0.
double recall_at_k(const RankedList& run, const Qrels& qrels, std::size_t k);

/// DCG@k / IDCG@k with gain 2^grade - 1 and discount log2(rank + 1). IDCG is
/// taken over every judged grade of the query. IDCG == 0 throws DataError.
double ndcg_at_k(const RankedList& run, const Qrels& qrels, std::size_t k);

// --- settings ---------------------------------------------------------------

enum class Setting { AudioToText = 0, TextToAudio = 1, IatToText = 2, IatToAudio = 3 };
inline constexpr std::array<Setting, 4> kAllSettings = {Setting::AudioToText, Setting::TextToAudio,
                                                        Setting::IatToText, Setting::IatToAudio};

/// "A->T", "T->A", "IAT->T", "IAT->A".
std::string to_string(Setting s);
/// "a2t", "t2a", "iat2t", "iat2a"; used in file names.
std::string file_tag(Setting s);
Setting setting_from_string(const std::string& name);

/// Queries, documents and judgments of one setting.
struct SettingData {
  Setting setting = Setting::IatToText;
  Corpus corpus;
  std::vector<InterleavedSequence> queries;
  Qrels qrels;
};

/// All four settings built by modality projection of a benchmark. Documents
/// are the text or audio views of the corpus (ids suffixed as in pipeline);
/// A->T queries are fully audio, T->A queries fully text.
struct EvalSuite {
  std::array<SettingData, 4> settings;
  const SettingData& at(Setting s) const { return settings[static_cast<std::size_t>(s)]; }
};

/// Rewrites every judged doc id to id + suffix.
Qrels suffix_qrels(const Qrels& qrels, const std::string& suffix);

EvalSuite build_eval_suite(const audiosynth::SyntheticBenchmark& bench, std::size_t workers = 1);

struct SettingMetrics {
  std::map<std::size_t, double> recall_at;
  std::map<std::size_t, double> ndcg_at;
  std::size_t n_queries = 0;
  friend bool operator==(const SettingMetrics&, const SettingMetrics&) = default;
};

struct MetricReport {
  std::map<Setting, SettingMetrics> settings;

  /// Mean over the settings present. Throws ConfigError when k was not
  /// evaluated.
  double mean_recall(std::size_t k) const;
  double mean_ndcg(std::size_t k) const;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Mean of per-query metrics over a run. Every run query must be judged and
/// every judged query must have a run; an empty run throws DataError.
SettingMetrics metrics_from_runs(const std::vector<RankedList>& runs, const Qrels& qrels,
                                 const std::vector<std::size_t>& k_list);

/// Encodes and searches `queries` against a prebuilt index, depth max(k_list).
std::vector<RankedList> run_queries(const encoder::RetrieverModel& model, const retrieval::EmbeddingIndex& index,
                                    const std::vector<InterleavedSequence>& queries,
                                    const encoder::AudioFrontEnd& front_end, std::size_t depth, std::size_t workers);

struct Evaluation {
  MetricReport report;
  std::map<Setting, std::vector<RankedList>> runs;
};

/// Builds one index per setting, searches every query and aggregates. With
/// `run_dir` set, writes run.<tag>.tsv files there.
Evaluation evaluate_settings(const encoder::RetrieverModel& model, const EvalSuite& suite,
                             const encoder::AudioFrontEnd& front_end, const std::vector<std::size_t>& k_list,
                             std::size_t workers = 1,
                             const std::optional<std::filesystem::path>& run_dir = std::nullopt);

/// Recomputes a report from run files written by evaluate_settings.
MetricReport report_from_run_files(const std::filesystem::path& run_dir, const EvalSuite& suite,
                                   const std::vector<std::size_t>& k_list);

// --- perturbations ----------------------------------------------------------

enum class PerturbationKind { Original = 0, ShuffleOrder = 1, ShufflePosition = 2, ShuffleBoth = 3 };
inline constexpr std::array<PerturbationKind, 4> kAllPerturbations = {
    PerturbationKind::Original, PerturbationKind::ShuffleOrder, PerturbationKind::ShufflePosition,
    PerturbationKind::ShuffleBoth};

std::string to_string(PerturbationKind kind);

/// Seed ShuffleBoth hands to its ShufflePosition step.
uint64_t position_sub_seed(uint64_t seed);

/// ShuffleOrder permutes audio contents over the audio slots (non-identity
/// when there are >= 2 audio segments). ShufflePosition re-chooses which
/// slots hold audio, keeping the relative order of audio and of text
/// (non-identity when both kinds occur). ShuffleBoth is ShuffleOrder with
/// `seed` followed by ShufflePosition with position_sub_seed(seed).
InterleavedSequence perturb(const InterleavedSequence& seq, PerturbationKind kind, uint64_t seed);

struct PerturbationRow {
  PerturbationKind kind = PerturbationKind::Original;
  /// IAT->T and IAT->A, averaged over seeds.
  std::map<Setting, double> recall1;
  std::map<Setting, double> ndcg5;
  /// Mean R@1 over the two settings, one entry per seed.
  std::vector<double> per_seed_recall1;

  double mean_recall1() const;
};

/// Perturbs the IAT queries (per-query seed derived from the study seed and
/// the query id) and evaluates against unperturbed documents. Original is
/// evaluated once and repeated for every seed.
std::vector<PerturbationRow> run_perturbation_study(const encoder::RetrieverModel& model, const EvalSuite& suite,
                                                    const encoder::AudioFrontEnd& front_end,
                                                    const std::vector<uint64_t>& seeds, std::size_t workers = 1);

// --- selector vs pooling ----------------------------------------------------

struct VariantRow {
  std::string name;
  MetricReport report;
};

/// Same weights, different audio front ends: selector, then pool-k for each k.
std::vector<VariantRow> compare_selector_vs_pooling(const encoder::RetrieverModel& model, const EvalSuite& suite,
                                                    const std::vector<std::size_t>& pool_ks = {2, 4, 8},
                                                    std::size_t workers = 1);

// --- ablations --------------------------------------------------------------

struct AblationRow {
  std::string name;
  MetricReport report;
  double mean_recall1 = 0.0;
  double mean_ndcg5 = 0.0;
  /// Relative to the first row, in absolute metric units.
  double delta_recall1 = 0.0;
  double delta_ndcg5 = 0.0;
};

/// The first entry is the reference (the full model).
std::vector<AblationRow> ablation_table(const std::vector<VariantRow>& variants);

struct AblationResult {
  std::vector<AblationRow> rows;
  std::map<std::string, pipeline::PipelineResult> trained;
};

/// Trains full / no-selector / no-Stage-I / no-Stage-II from `base` and
/// evaluates each with its own front end.
AblationResult ablate_components(const audiosynth::SyntheticBenchmark& bench, const EvalSuite& suite,
                                 const pipeline::PipelineConfig& base, std::size_t workers = 1);

// --- ASR channel --------------------------------------------------------------

/// Replaces each audio segment with its transcript, dropping or substituting
/// each word with probability `wer` (half each). A missing transcript throws
/// DataError.
InterleavedSequence asr_channel(const InterleavedSequence& seq, double wer, uint64_t seed);

/// A->T and IAT->T with queries passed through asr_channel.
MetricReport evaluate_asr(const encoder::RetrieverModel& model, const EvalSuite& suite, double wer, uint64_t seed,
                          const std::vector<std::size_t>& k_list, std::size_t workers = 1);

// --- latency ------------------------------------------------------------------

struct LatencyVariant {
  std::string name;
  const encoder::RetrieverModel* model = nullptr;
  encoder::AudioFrontEnd front_end;
};

struct LatencyRow {
  std::string name;
  std::size_t params = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::map<Setting, double> setting_mean_ms;
  /// Audio frames that reach pooling, summed over one pass of the queries.
  std::size_t processed_frames = 0;
  std::size_t samples = 0;
};

struct LatencyOptions {
  std::size_t warmup = 1;
  std::size_t reps = 3;
  /// Queries per setting; 0 uses all.
  std::size_t max_queries = 0;
};

/// Per-query embedding time on a single thread (search excluded). Each rep
/// embeds every query once; warm-up reps are discarded.
std::vector<LatencyRow> bench_latency(const std::vector<LatencyVariant>& variants, const EvalSuite& suite,
                                      const LatencyOptions& options);

/// Retriever parameters, plus the selector when the front end uses it.
std::size_t variant_parameter_count(const encoder::RetrieverModel& model, const encoder::AudioFrontEnd& front_end);

// --- report tables ----------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_tsv() const;
  /// Space-padded columns, a dashed rule under the header.
  std::string to_text() const;
};

Table metrics_table(const MetricReport& report);
Table ablation_report(const std::vector<AblationRow>& rows);
Table perturbation_report(const std::vector<PerturbationRow>& rows);
Table pooling_report(const std::vector<VariantRow>& rows);
Table latency_report(const std::vector<LatencyRow>& rows);

/// Writes <stem>.tsv and <stem>.txt.
void write_table(const Table& table, const std::filesystem::path& dir, const std::string& stem);

}  // namespace atir::evalx
