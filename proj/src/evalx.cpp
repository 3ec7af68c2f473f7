#include "atir/evalx.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "atir/error.hpp"
#include "atir/util.hpp"

namespace atir::evalx {

namespace {

void require_k(std::size_t k, const char* who) {
  if (k == 0) throw ConfigError(std::string(who) + ": k must be >= 1");
}

const std::map<std::string, int>& judged_with_positive(const RankedList& run, const Qrels& qrels, const char* who) {
  if (!qrels.has_query(run.query_id())) {
    throw DataError(std::string(who) + ": query " + run.query_id() + " missing from qrels");
  }
  return qrels.judgments(run.query_id());
}

std::string fixed(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string signed_fixed(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.*f", decimals, v);
  return buf;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double median_of(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

uint64_t query_seed(uint64_t seed, const std::string& id) { return mix_seed(seed, fnv1a64(id)); }

std::size_t max_k(const std::vector<std::size_t>& k_list) {
  if (k_list.empty()) throw ConfigError("evaluation: k_list is empty");
  for (auto k : k_list) require_k(k, "evaluation");
  return *std::max_element(k_list.begin(), k_list.end());
}

SettingMetrics evaluate_one(const encoder::RetrieverModel& model, const retrieval::EmbeddingIndex& index,
                            const std::vector<InterleavedSequence>& queries, const Qrels& qrels,
                            const encoder::AudioFrontEnd& front_end, const std::vector<std::size_t>& k_list,
                            std::size_t workers, std::vector<RankedList>* runs_out = nullptr) {
  auto runs = run_queries(model, index, queries, front_end, max_k(k_list), workers);
  auto metrics = metrics_from_runs(runs, qrels, k_list);
  if (runs_out) *runs_out = std::move(runs);
  return metrics;
}

}  // namespace

double recall_at_k(const RankedList& run, const Qrels& qrels, std::size_t k) {
  require_k(k, "recall_at_k");
  const auto& judged = judged_with_positive(run, qrels, "recall_at_k");
  bool any_positive = false;
  for (const auto& [doc, grade] : judged) any_positive = any_positive || grade >= 1;
  if (!any_positive) throw DataError("recall_at_k: query " + run.query_id() + " has no positive");
  const auto& entries = run.entries();
  for (std::size_t r = 0; r < std::min(k, entries.size()); ++r) {
    auto it = judged.find(entries[r].doc_id);
    if (it != judged.end() && it->second >= 1) return 1.0;
  }
  return 0.0;
}

double ndcg_at_k(const RankedList& run, const Qrels& qrels, std::size_t k) {
  require_k(k, "ndcg_at_k");
  const auto& judged = judged_with_positive(run, qrels, "ndcg_at_k");
  auto gain = [](int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; };

  std::vector<int> grades;
  for (const auto& [doc, grade] : judged) grades.push_back(grade);
  std::sort(grades.rbegin(), grades.rend());
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) idcg += gain(grades[r]) / std::log2(r + 2.0);
  if (!(idcg > 0.0)) throw DataError("ndcg_at_k: IDCG is zero for query " + run.query_id());

  double dcg = 0.0;
  const auto& entries = run.entries();
  for (std::size_t r = 0; r < std::min(k, entries.size()); ++r) {
    auto it = judged.find(entries[r].doc_id);
    if (it != judged.end()) dcg += gain(it->second) / std::log2(r + 2.0);
  }
  return dcg / idcg;
}

std::string to_string(Setting s) {
  switch (s) {
    case Setting::AudioToText: return "A->T";
    case Setting::TextToAudio: return "T->A";
    case Setting::IatToText: return "IAT->T";
    case Setting::IatToAudio: return "IAT->A";
  }
  return "?";
}

std::string file_tag(Setting s) {
  switch (s) {
    case Setting::AudioToText: return "a2t";
    case Setting::TextToAudio: return "t2a";
    case Setting::IatToText: return "iat2t";
    case Setting::IatToAudio: return "iat2a";
  }
  return "?";
}

Setting setting_from_string(const std::string& name) {
  for (auto s : kAllSettings) {
    if (name == to_string(s) || name == file_tag(s)) return s;
  }
  throw ConfigError("unknown setting: " + name);
}

Qrels suffix_qrels(const Qrels& qrels, const std::string& suffix) {
  Qrels out;
  for (const auto& [qid, docs] : qrels.all()) {
    for (const auto& [doc, grade] : docs) out.set(qid, doc + suffix, grade);
  }
  return out;
}

EvalSuite build_eval_suite(const audiosynth::SyntheticBenchmark& bench, std::size_t workers) {
  if (bench.queries.empty()) throw DataError("build_eval_suite: benchmark has no queries");
  const Corpus text_docs = pipeline::text_view_corpus(bench.corpus);
  const Corpus audio_docs = pipeline::audio_view_corpus(bench.corpus, bench.config);
  const Qrels text_qrels = suffix_qrels(bench.qrels, pipeline::kTextViewSuffix);
  const Qrels audio_qrels = suffix_qrels(bench.qrels, pipeline::kAudioViewSuffix);

  const std::size_t n = bench.queries.size();
  std::vector<InterleavedSequence> audio_queries(n), text_queries(n);
  parallel_for(n, workers, [&](std::size_t i) {
    audio_queries[i] = audiosynth::project_to_audio(bench.queries[i], bench.config);
    text_queries[i] = audiosynth::project_to_text(bench.queries[i]);
  });

  EvalSuite suite;
  suite.settings[0] = {Setting::AudioToText, text_docs, std::move(audio_queries), text_qrels};
  suite.settings[1] = {Setting::TextToAudio, audio_docs, std::move(text_queries), audio_qrels};
  suite.settings[2] = {Setting::IatToText, text_docs, bench.queries, text_qrels};
  suite.settings[3] = {Setting::IatToAudio, audio_docs, bench.queries, audio_qrels};
  return suite;
}

double MetricReport::mean_recall(std::size_t k) const {
  if (settings.empty()) throw ConfigError("mean_recall: empty report");
  double total = 0.0;
  for (const auto& [s, m] : settings) {
    auto it = m.recall_at.find(k);
    if (it == m.recall_at.end()) throw ConfigError("mean_recall: R@" + std::to_string(k) + " not evaluated");
    total += it->second;
  }
  return total / static_cast<double>(settings.size());
}

double MetricReport::mean_ndcg(std::size_t k) const {
  if (settings.empty()) throw ConfigError("mean_ndcg: empty report");
  double total = 0.0;
  for (const auto& [s, m] : settings) {
    auto it = m.ndcg_at.find(k);
    if (it == m.ndcg_at.end()) throw ConfigError("mean_ndcg: nDCG@" + std::to_string(k) + " not evaluated");
    total += it->second;
  }
  return total / static_cast<double>(settings.size());
}

SettingMetrics metrics_from_runs(const std::vector<RankedList>& runs, const Qrels& qrels,
                                 const std::vector<std::size_t>& k_list) {
  max_k(k_list);
  if (runs.empty()) throw DataError("metrics_from_runs: empty setting");
  std::set<std::string> seen;
  for (const auto& run : runs) {
    if (!seen.insert(run.query_id()).second) throw DataError("metrics_from_runs: duplicate run for " + run.query_id());
  }
  for (const auto& qid : qrels.query_ids()) {
    if (!seen.count(qid)) throw DataError("metrics_from_runs: no run for judged query " + qid);
  }

  SettingMetrics m;
  m.n_queries = runs.size();
  for (auto k : k_list) {
    double r = 0.0, n = 0.0;
    for (const auto& run : runs) {
      r += recall_at_k(run, qrels, k);
      n += ndcg_at_k(run, qrels, k);
    }
    m.recall_at[k] = r / static_cast<double>(runs.size());
    m.ndcg_at[k] = n / static_cast<double>(runs.size());
  }
  return m;
}

std::vector<RankedList> run_queries(const encoder::RetrieverModel& model, const retrieval::EmbeddingIndex& index,
                                    const std::vector<InterleavedSequence>& queries,
                                    const encoder::AudioFrontEnd& front_end, std::size_t depth, std::size_t workers) {
  auto embedded = retrieval::encode_queries(model, queries, front_end, workers);
  return retrieval::batch_search(index, embedded, depth, workers);
}

Evaluation evaluate_settings(const encoder::RetrieverModel& model, const EvalSuite& suite,
                             const encoder::AudioFrontEnd& front_end, const std::vector<std::size_t>& k_list,
                             std::size_t workers, const std::optional<std::filesystem::path>& run_dir) {
  max_k(k_list);
  if (run_dir) std::filesystem::create_directories(*run_dir);
  Evaluation out;
  for (const auto& data : suite.settings) {
    if (data.queries.empty() || data.corpus.empty()) {
      throw DataError("evaluate_settings: empty setting " + to_string(data.setting));
    }
    auto index = retrieval::build_index(model, data.corpus, front_end, workers);
    std::vector<RankedList> runs;
    out.report.settings[data.setting] =
        evaluate_one(model, index, data.queries, data.qrels, front_end, k_list, workers, &runs);
    if (run_dir) write_run(runs, *run_dir / ("run." + file_tag(data.setting) + ".tsv"));
    out.runs[data.setting] = std::move(runs);
  }
  return out;
}

MetricReport report_from_run_files(const std::filesystem::path& run_dir, const EvalSuite& suite,
                                   const std::vector<std::size_t>& k_list) {
  MetricReport report;
  for (const auto& data : suite.settings) {
    auto runs = read_run(run_dir / ("run." + file_tag(data.setting) + ".tsv"));
    report.settings[data.setting] = metrics_from_runs(runs, data.qrels, k_list);
  }
  return report;
}

// --- perturbations ----------------------------------------------------------

std::string to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::Original: return "Original";
    case PerturbationKind::ShuffleOrder: return "ShuffleOrder";
    case PerturbationKind::ShufflePosition: return "ShufflePosition";
    case PerturbationKind::ShuffleBoth: return "ShuffleBoth";
  }
  return "?";
}

uint64_t position_sub_seed(uint64_t seed) { return mix_seed(seed, 0x706f73ULL); }

namespace {

InterleavedSequence shuffle_order(const InterleavedSequence& seq, uint64_t seed) {
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < seq.segments.size(); ++i) {
    if (seq.segments[i].is_audio()) slots.push_back(i);
  }
  InterleavedSequence out = seq;
  if (slots.size() < 2) return out;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(slots.size());
  std::iota(perm.begin(), perm.end(), 0);
  const auto identity = perm;
  while (perm == identity) std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < slots.size(); ++i) out.segments[slots[i]] = seq.segments[slots[perm[i]]];
  return out;
}

InterleavedSequence shuffle_position(const InterleavedSequence& seq, uint64_t seed) {
  const std::size_t n = seq.segments.size();
  std::vector<uint8_t> mask(n);
  std::vector<const Segment*> audio, text;
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = seq.segments[i].is_audio();
    (mask[i] ? audio : text).push_back(&seq.segments[i]);
  }
  if (audio.empty() || text.empty()) return seq;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> positions(n);
  std::vector<uint8_t> fresh = mask;
  while (fresh == mask) {
    std::iota(positions.begin(), positions.end(), 0);
    std::shuffle(positions.begin(), positions.end(), rng);
    std::fill(fresh.begin(), fresh.end(), 0);
    for (std::size_t i = 0; i < audio.size(); ++i) fresh[positions[i]] = 1;
  }
  InterleavedSequence out;
  out.id = seq.id;
  std::size_t a = 0, t = 0;
  for (std::size_t i = 0; i < n; ++i) out.segments.push_back(fresh[i] ? *audio[a++] : *text[t++]);
  return out;
}

}  // namespace

InterleavedSequence perturb(const InterleavedSequence& seq, PerturbationKind kind, uint64_t seed) {
  switch (kind) {
    case PerturbationKind::Original: return seq;
    case PerturbationKind::ShuffleOrder: return shuffle_order(seq, seed);
    case PerturbationKind::ShufflePosition: return shuffle_position(seq, seed);
    case PerturbationKind::ShuffleBoth: return shuffle_position(shuffle_order(seq, seed), position_sub_seed(seed));
  }
  return seq;
}

double PerturbationRow::mean_recall1() const { return mean_of(per_seed_recall1); }

std::vector<PerturbationRow> run_perturbation_study(const encoder::RetrieverModel& model, const EvalSuite& suite,
                                                    const encoder::AudioFrontEnd& front_end,
                                                    const std::vector<uint64_t>& seeds, std::size_t workers) {
  if (seeds.empty()) throw ConfigError("run_perturbation_study: no seeds");
  const std::vector<std::size_t> ks = {1, 5};
  const std::array<Setting, 2> settings = {Setting::IatToText, Setting::IatToAudio};
  std::map<Setting, retrieval::EmbeddingIndex> indexes;
  for (auto s : settings) indexes[s] = retrieval::build_index(model, suite.at(s).corpus, front_end, workers);

  std::vector<PerturbationRow> rows;
  for (auto kind : kAllPerturbations) {
    PerturbationRow row;
    row.kind = kind;
    std::map<Setting, std::vector<double>> r1, n5;
    const std::size_t passes = kind == PerturbationKind::Original ? 1 : seeds.size();
    for (std::size_t p = 0; p < passes; ++p) {
      double seed_r1 = 0.0;
      for (auto s : settings) {
        const auto& data = suite.at(s);
        std::vector<InterleavedSequence> queries(data.queries.size());
        parallel_for(queries.size(), workers, [&](std::size_t i) {
          queries[i] = perturb(data.queries[i], kind, query_seed(seeds[p], data.queries[i].id));
        });
        auto m = evaluate_one(model, indexes.at(s), queries, data.qrels, front_end, ks, workers);
        r1[s].push_back(m.recall_at.at(1));
        n5[s].push_back(m.ndcg_at.at(5));
        seed_r1 += m.recall_at.at(1) / static_cast<double>(settings.size());
      }
      row.per_seed_recall1.push_back(seed_r1);
    }
    if (kind == PerturbationKind::Original) {
      row.per_seed_recall1.assign(seeds.size(), row.per_seed_recall1.front());
    }
    for (auto s : settings) {
      row.recall1[s] = mean_of(r1[s]);
      row.ndcg5[s] = mean_of(n5[s]);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- selector vs pooling ----------------------------------------------------

std::vector<VariantRow> compare_selector_vs_pooling(const encoder::RetrieverModel& model, const EvalSuite& suite,
                                                    const std::vector<std::size_t>& pool_ks, std::size_t workers) {
  std::vector<std::pair<std::string, encoder::AudioFrontEnd>> variants = {
      {"selector", encoder::AudioFrontEnd::selector()}};
  for (auto k : pool_ks) {
    if (k == 0) throw ConfigError("compare_selector_vs_pooling: pool size must be >= 1");
    variants.emplace_back("pool-" + std::to_string(k), encoder::AudioFrontEnd::pool(k));
  }
  std::vector<VariantRow> rows;
  for (const auto& [name, fe] : variants) {
    rows.push_back({name, evaluate_settings(model, suite, fe, {1, 5}, workers).report});
  }
  return rows;
}

// --- ablations --------------------------------------------------------------

std::vector<AblationRow> ablation_table(const std::vector<VariantRow>& variants) {
  if (variants.empty()) throw ConfigError("ablation_table: no variants");
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    AblationRow row;
    row.name = v.name;
    row.report = v.report;
    row.mean_recall1 = v.report.mean_recall(1);
    row.mean_ndcg5 = v.report.mean_ndcg(5);
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) {
    row.delta_recall1 = row.mean_recall1 - rows.front().mean_recall1;
    row.delta_ndcg5 = row.mean_ndcg5 - rows.front().mean_ndcg5;
  }
  return rows;
}

AblationResult ablate_components(const audiosynth::SyntheticBenchmark& bench, const EvalSuite& suite,
                                 const pipeline::PipelineConfig& base, std::size_t workers) {
  std::vector<std::pair<std::string, pipeline::PipelineConfig>> plans;
  plans.emplace_back("full", base);
  auto no_selector = base;
  no_selector.use_selector = false;
  plans.emplace_back("no-selector", no_selector);
  auto no_stage1 = base;
  no_stage1.run_stage1 = false;
  plans.emplace_back("no-stage-I", no_stage1);
  auto no_stage2 = base;
  no_stage2.run_stage2 = false;
  plans.emplace_back("no-stage-II", no_stage2);

  AblationResult result;
  std::vector<VariantRow> variants;
  for (auto& [name, cfg] : plans) {
    auto trained = pipeline::train_pipeline(bench, cfg);
    variants.push_back({name, evaluate_settings(trained.model, suite, cfg.front_end(), {1, 5}, workers).report});
    result.trained.emplace(name, std::move(trained));
  }
  result.rows = ablation_table(variants);
  return result;
}

// --- ASR channel --------------------------------------------------------------

InterleavedSequence asr_channel(const InterleavedSequence& seq, double wer, uint64_t seed) {
  if (!(wer >= 0.0 && wer <= 1.0)) throw ConfigError("asr_channel: wer must lie in [0, 1]");
  InterleavedSequence out;
  out.id = seq.id;
  for (std::size_t i = 0; i < seq.segments.size(); ++i) {
    const auto& seg = seq.segments[i];
    if (!seg.is_audio()) {
      out.segments.push_back(seg);
      continue;
    }
    if (!seg.transcript) throw DataError("asr_channel: audio segment " + std::to_string(i) + " of " + seq.id +
                                         " has no transcript");
    std::mt19937_64 rng(mix_seed(seed, i));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::istringstream words(*seg.transcript);
    std::string word, text;
    auto emit = [&](const std::string& w) { text += (text.empty() ? "" : " ") + w; };
    while (words >> word) {
      if (u(rng) >= wer) {
        emit(word);
      } else if (u(rng) < 0.5) {
        emit("asr" + hex64(rng()).substr(0, 8));
      }
    }
    // An all-dropped segment still yields one (wrong) word.
    if (text.empty()) emit("asr" + hex64(rng()).substr(0, 8));
    out.segments.push_back(Segment::make_text(std::move(text)));
  }
  return out;
}

MetricReport evaluate_asr(const encoder::RetrieverModel& model, const EvalSuite& suite, double wer, uint64_t seed,
                          const std::vector<std::size_t>& k_list, std::size_t workers) {
  MetricReport report;
  std::optional<retrieval::EmbeddingIndex> text_index;
  for (auto s : {Setting::AudioToText, Setting::IatToText}) {
    const auto& data = suite.at(s);
    // Text-only queries: the audio front end never runs.
    const auto fe = encoder::AudioFrontEnd::all_frames();
    if (!text_index) text_index = retrieval::build_index(model, data.corpus, fe, workers);
    std::vector<InterleavedSequence> queries(data.queries.size());
    parallel_for(queries.size(), workers, [&](std::size_t i) {
      queries[i] = asr_channel(data.queries[i], wer, query_seed(seed, data.queries[i].id));
    });
    report.settings[s] = evaluate_one(model, *text_index, queries, data.qrels, fe, k_list, workers);
  }
  return report;
}

// --- latency ------------------------------------------------------------------

std::size_t variant_parameter_count(const encoder::RetrieverModel& model, const encoder::AudioFrontEnd& front_end) {
  std::size_t n = model.text_table.data().size() + model.audio_proj.data().size() + model.fusion.data().size();
  if (front_end.kind == encoder::AudioFrontEnd::Kind::Selector) n += model.selector.weights.size() + 1;
  return n;
}

std::vector<LatencyRow> bench_latency(const std::vector<LatencyVariant>& variants, const EvalSuite& suite,
                                      const LatencyOptions& options) {
  if (options.reps < 1) throw ConfigError("bench_latency: reps must be >= 1");
  using clock = std::chrono::steady_clock;
  volatile double sink = 0.0;
  std::vector<LatencyRow> rows;
  for (const auto& v : variants) {
    if (!v.model) throw ConfigError("bench_latency: variant " + v.name + " has no model");
    LatencyRow row;
    row.name = v.name;
    row.params = variant_parameter_count(*v.model, v.front_end);
    std::vector<double> all;
    for (const auto& data : suite.settings) {
      const std::size_t n = options.max_queries ? std::min(options.max_queries, data.queries.size())
                                                : data.queries.size();
      std::vector<double> samples;
      for (std::size_t rep = 0; rep < options.warmup + options.reps; ++rep) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto t0 = clock::now();
          auto e = encoder::encode_sequence(*v.model, data.queries[i], v.front_end);
          const auto t1 = clock::now();
          sink = sink + e[0];
          if (rep >= options.warmup) samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        row.processed_frames += encoder::processed_frames(*v.model, data.queries[i], v.front_end);
      }
      row.setting_mean_ms[data.setting] = mean_of(samples);
      all.insert(all.end(), samples.begin(), samples.end());
    }
    row.samples = all.size();
    row.mean_ms = mean_of(all);
    row.median_ms = median_of(all);
    if (!all.empty()) {
      row.min_ms = *std::min_element(all.begin(), all.end());
      row.max_ms = *std::max_element(all.begin(), all.end());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- report tables ----------------------------------------------------------

std::string Table::to_tsv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "\t" : "") + cells[i];
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string Table::to_text() const {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& cells) {
    if (cells.size() != width.size()) throw DataError("Table: row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) width[i] = std::max(width[i], cells[i].size());
  };
  measure(header);
  for (const auto& r : rows) measure(r);

  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string pad(width[i] - cells[i].size(), ' ');
      if (i) s += "  ";
      s += i == 0 ? cells[i] + pad : pad + cells[i];
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    out += s + '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
  for (const auto& r : rows) line(r);
  return out;
}

Table metrics_table(const MetricReport& report) {
  Table t;
  t.header = {"setting", "queries"};
  if (report.settings.empty()) return t;
  const auto& first = report.settings.begin()->second;
  for (const auto& [k, v] : first.recall_at) t.header.push_back("R@" + std::to_string(k));
  for (const auto& [k, v] : first.ndcg_at) t.header.push_back("nDCG@" + std::to_string(k));
  for (const auto& [s, m] : report.settings) {
    std::vector<std::string> row = {to_string(s), std::to_string(m.n_queries)};
    for (const auto& [k, v] : first.recall_at) row.push_back(fixed(m.recall_at.at(k)));
    for (const auto& [k, v] : first.ndcg_at) row.push_back(fixed(m.ndcg_at.at(k)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table ablation_report(const std::vector<AblationRow>& rows) {
  Table t;
  t.header = {"model"};
  for (auto s : kAllSettings) {
    t.header.push_back(to_string(s) + " R@1");
    t.header.push_back(to_string(s) + " nDCG@5");
  }
  for (const char* h : {"mean R@1", "mean nDCG@5", "delta R@1", "delta nDCG@5"}) t.header.push_back(h);
  for (const auto& r : rows) {
    std::vector<std::string> cells = {r.name};
    for (auto s : kAllSettings) {
      const auto& m = r.report.settings.at(s);
      cells.push_back(fixed(m.recall_at.at(1)));
      cells.push_back(fixed(m.ndcg_at.at(5)));
    }
    cells.push_back(fixed(r.mean_recall1));
    cells.push_back(fixed(r.mean_ndcg5));
    cells.push_back(signed_fixed(r.delta_recall1));
    cells.push_back(signed_fixed(r.delta_ndcg5));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table perturbation_report(const std::vector<PerturbationRow>& rows) {
  Table t;
  t.header = {"perturbation"};
  for (auto s : {Setting::IatToText, Setting::IatToAudio}) {
    t.header.push_back(to_string(s) + " R@1");
    t.header.push_back(to_string(s) + " nDCG@5");
  }
  t.header.push_back("mean R@1");
  t.header.push_back("seeds");
  for (const auto& r : rows) {
    std::vector<std::string> cells = {to_string(r.kind)};
    for (auto s : {Setting::IatToText, Setting::IatToAudio}) {
      cells.push_back(fixed(r.recall1.at(s)));
      cells.push_back(fixed(r.ndcg5.at(s)));
    }
    cells.push_back(fixed(r.mean_recall1()));
    cells.push_back(std::to_string(r.per_seed_recall1.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table pooling_report(const std::vector<VariantRow>& rows) {
  Table t;
  t.header = {"front end"};
  for (auto s : kAllSettings) t.header.push_back(to_string(s) + " R@1");
  t.header.push_back("mean R@1");
  t.header.push_back("mean nDCG@5");
  for (const auto& r : rows) {
    std::vector<std::string> cells = {r.name};
    for (auto s : kAllSettings) cells.push_back(fixed(r.report.settings.at(s).recall_at.at(1)));
    cells.push_back(fixed(r.report.mean_recall(1)));
    cells.push_back(fixed(r.report.mean_ndcg(5)));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

Table latency_report(const std::vector<LatencyRow>& rows) {
  Table t;
  t.header = {"variant", "params"};
  for (auto s : kAllSettings) t.header.push_back(to_string(s) + " ms");
  for (const char* h : {"mean ms", "median ms", "frames", "samples"}) t.header.push_back(h);
  for (const auto& r : rows) {
    std::vector<std::string> cells = {r.name, std::to_string(r.params)};
    for (auto s : kAllSettings) {
      auto it = r.setting_mean_ms.find(s);
      cells.push_back(it == r.setting_mean_ms.end() ? "-" : fixed(it->second, 4));
    }
    cells.push_back(fixed(r.mean_ms));
    cells.push_back(fixed(r.median_ms));
    cells.push_back(std::to_string(r.processed_frames));
    cells.push_back(std::to_string(r.samples));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

void write_table(const Table& table, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  for (const auto& [ext, body] : {std::pair{".tsv", table.to_tsv()}, std::pair{".txt", table.to_text()}}) {
    const auto path = dir / (stem + ext);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << body;
  }
}

}  // namespace atir::evalx
