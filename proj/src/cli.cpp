#include "atir/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "atir/encoder.hpp"
#include "atir/error.hpp"
#include "atir/mining.hpp"
#include "atir/retrieval.hpp"
#include "atir/selector.hpp"
#include "atir/training.hpp"
#include "atir/util.hpp"

namespace atir::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void flatten(const json& node, const std::string& prefix, KeyValues& out) {
  auto scalar = [](const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number() || v.is_null()) return v.dump();
    throw ConfigError("config: nested arrays are not supported");
  };
  if (node.is_object()) {
    for (const auto& [k, v] : node.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (node.is_array()) {
    std::string joined;
    for (const auto& v : node) joined += (joined.empty() ? "" : ",") + scalar(v);
    out[prefix] = joined;
  } else {
    out[prefix] = scalar(node);
  }
}

// Typed access that remembers which keys were read, so leftovers can be
// reported as unknown.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  const std::string* raw(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  void real(const std::string& key, double& out) {
    if (auto v = raw(key)) out = parse_real(key, *v);
  }

  template <typename T>
  void count(const std::string& key, T& out) {
    if (auto v = raw(key)) out = static_cast<T>(parse_count(key, *v));
  }

  void flag(const std::string& key, bool& out) {
    auto v = raw(key);
    if (!v) return;
    if (*v == "true" || *v == "1" || *v == "yes") out = true;
    else if (*v == "false" || *v == "0" || *v == "no") out = false;
    else throw ConfigError("config: '" + key + "' expects a boolean, got '" + *v + "'");
  }

  void path(const std::string& key, fs::path& out) {
    if (auto v = raw(key)) out = *v;
  }

  template <typename T>
  void list(const std::string& key, std::vector<T>& out) {
    auto v = raw(key);
    if (!v) return;
    std::string s = *v;
    for (auto& c : s) {
      if (c == ',') c = ' ';
    }
    std::istringstream in(s);
    std::string item;
    out.clear();
    while (in >> item) out.push_back(static_cast<T>(parse_count(key, item)));
    if (out.empty()) throw ConfigError("config: '" + key + "' is empty");
  }

  /// Keys under `prefix.` with the prefix stripped; marks them used.
  KeyValues section(const std::string& prefix) {
    KeyValues out;
    for (const auto& [k, v] : kv_) {
      if (k.rfind(prefix + ".", 0) == 0) {
        out[k.substr(prefix.size() + 1)] = v;
        used_.insert(k);
      }
    }
    return out;
  }

  void finish() const {
    for (const auto& [k, v] : kv_) {
      if (!used_.count(k)) throw ConfigError("config: unknown key '" + k + "'");
    }
  }

 private:
  static double parse_real(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config: '" + key + "' expects a real, got '" + v + "'");
    }
  }

  static uint64_t parse_count(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const auto n = std::stoull(v, &used);
      if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
  }

  const KeyValues& kv_;
  std::set<std::string> used_;
};

void read_optimizer(Reader& r, const std::string& prefix, OptimizerConfig& o) {
  r.real(prefix + ".learning_rate", o.learning_rate);
  r.real(prefix + ".lr_scale", o.lr_scale);
  r.real(prefix + ".warmup_fraction", o.warmup_fraction);
  r.count(prefix + ".max_warmup_steps", o.max_warmup_steps);
  r.count(prefix + ".epochs", o.epochs);
  r.count(prefix + ".batch_size", o.batch_size);
  r.count(prefix + ".seed", o.seed);
  r.real(prefix + ".momentum", o.momentum);
  r.count(prefix + ".max_steps", o.max_steps);
  r.real(prefix + ".text_rate_mult", o.text_rate_mult);
  r.real(prefix + ".audio_rate_mult", o.audio_rate_mult);
  r.real(prefix + ".fusion_rate_mult", o.fusion_rate_mult);
  try {
    o.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + ": " + e.what());
  }
}

fs::path rel(const ExperimentConfig& cfg, const fs::path& p) { return p.lexically_relative(cfg.paths.out_dir); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw DataError("missing " + what + ": " + p.string());
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << body;
}

fs::path index_path(const ExperimentConfig& cfg, const std::string& view) {
  return cfg.paths.out_dir / ("index." + view + ".bin");
}

fs::path runs_dir(const ExperimentConfig& cfg) { return cfg.paths.out_dir / "runs"; }
fs::path reports_dir(const ExperimentConfig& cfg) { return cfg.paths.out_dir / "reports"; }

bool targets_text(evalx::Setting s) {
  return s == evalx::Setting::AudioToText || s == evalx::Setting::IatToText;
}

encoder::RetrieverModel load_model(const ExperimentConfig& cfg) {
  require_file(cfg.paths.model, "model checkpoint");
  return encoder::load_checkpoint(cfg.paths.model);
}

std::vector<fs::path> write_report(const ExperimentConfig& cfg, const evalx::Table& table, const std::string& stem) {
  evalx::write_table(table, reports_dir(cfg), stem);
  return {reports_dir(cfg) / (stem + ".tsv"), reports_dir(cfg) / (stem + ".txt")};
}

json metrics_json(const evalx::MetricReport& report) {
  json j = json::object();
  for (const auto& [s, m] : report.settings) {
    json row;
    row["n_queries"] = m.n_queries;
    for (const auto& [k, v] : m.recall_at) row["recall"][std::to_string(k)] = v;
    for (const auto& [k, v] : m.ndcg_at) row["ndcg"][std::to_string(k)] = v;
    j[evalx::to_string(s)] = row;
  }
  return j;
}

Manifest finish(const ExperimentConfig& cfg, const std::string& command, const std::vector<fs::path>& outputs) {
  const auto path = write_manifest(cfg, command, outputs);
  auto j = json::parse(read_file(path));
  Manifest m;
  m.command = command;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  return m;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues parse_json_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: JSON config must be an object");
  KeyValues kv;
  flatten(j, "", kv);
  return kv;
}

KeyValues load_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_json_config(text);
  return parse_key_values(text);
}

std::optional<fs::path> resolve_config_path(const std::optional<std::string>& given) {
  const char* env = std::getenv(kConfigDirEnv);
  const std::optional<fs::path> dir = env && *env ? std::optional<fs::path>(env) : std::nullopt;
  if (given) {
    const fs::path p(*given);
    if (fs::is_regular_file(p)) return p;
    if (dir && p.is_relative() && fs::is_regular_file(*dir / p)) return *dir / p;
    throw ConfigError("config file not found: " + *given);
  }
  if (dir && fs::is_regular_file(*dir / kDefaultConfigName)) return *dir / kDefaultConfigName;
  return std::nullopt;
}

void apply_override(KeyValues& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const auto key = trim(assignment.substr(0, eq));
  if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
  kv[key] = trim(assignment.substr(eq + 1));
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  ExperimentConfig cfg;
  cfg.source = kv;
  Reader r(kv);

  r.path("paths.out_dir", cfg.paths.out_dir);
  fs::path data_dir = cfg.paths.out_dir / "data";
  r.path("paths.data_dir", data_dir);
  cfg.paths.corpus = data_dir / "corpus.jsonl";
  cfg.paths.queries = data_dir / "queries.jsonl";
  cfg.paths.qrels = data_dir / "qrels.tsv";
  cfg.paths.train_queries = data_dir / "train_queries.jsonl";
  cfg.paths.train_qrels = data_dir / "train_qrels.tsv";
  cfg.paths.selector = cfg.paths.out_dir / "selector.json";
  cfg.paths.model = cfg.paths.out_dir / "model.json";
  cfg.paths.stage1_model = cfg.paths.out_dir / "stage1.json";
  r.path("paths.corpus", cfg.paths.corpus);
  r.path("paths.queries", cfg.paths.queries);
  r.path("paths.qrels", cfg.paths.qrels);
  r.path("paths.train_queries", cfg.paths.train_queries);
  r.path("paths.train_qrels", cfg.paths.train_qrels);
  r.path("paths.selector", cfg.paths.selector);
  r.path("paths.model", cfg.paths.model);
  r.path("paths.stage1_model", cfg.paths.stage1_model);

  cfg.synth = audiosynth::parse_synth_config(r.section("synth"));

  r.count("bench.n_docs", cfg.size.n_docs);
  r.count("bench.n_queries", cfg.size.n_queries);
  r.real("bench.turns_per_query", cfg.size.turns_per_query);
  r.count("bench.n_train_queries", cfg.size.n_train_queries);

  auto& p = cfg.pipeline;
  r.count("model.vocab_buckets", p.dims.vocab_buckets);
  r.count("model.d", p.dims.d);
  r.count("model.d_out", p.dims.d_out);
  r.count("model.max_segments", p.dims.max_segments);
  r.count("model.seed", p.model_seed);
  r.real("model.tau", p.tau);
  p.dims.frame_dim = cfg.synth.frame_dim;

  r.real("selector.threshold", p.selector_options.threshold);
  r.count("selector.min_keep", p.selector_options.min_keep);
  r.real("selector.holdout_fraction", p.selector_options.holdout_fraction);
  r.count("selector.eval_every", p.selector_options.eval_every);
  read_optimizer(r, "selector_opt", p.selector_opt);
  read_optimizer(r, "stage1", p.stage1_opt);
  read_optimizer(r, "stage2", p.stage2_opt);

  r.count("mining.top_k_pool", p.mining.top_k_pool);
  r.count("mining.max_hard_negatives", p.mining.max_hard_negatives);
  r.flag("mining.require_positive_found", p.mining.require_positive_found);

  r.count("train.stage1_pairs_per_doc", p.stage1_pairs_per_doc);
  r.flag("train.use_selector", p.use_selector);
  r.flag("train.run_stage1", p.run_stage1);
  r.flag("train.run_stage2", p.run_stage2);
  r.flag("train.joint_selector", p.joint_selector);
  r.count("workers", p.workers);

  r.list("eval.k_list", cfg.k_list);
  r.flag("eval.asr", cfg.eval_asr);
  r.real("eval.asr_wer", cfg.asr_wer);
  r.count("eval.asr_seed", cfg.asr_seed);
  r.count("search.depth", cfg.search_depth);
  r.list("perturb.seeds", cfg.perturb_seeds);
  r.list("pooling.ks", cfg.pool_ks);
  r.count("latency.warmup", cfg.latency.warmup);
  r.count("latency.reps", cfg.latency.reps);
  r.count("latency.max_queries", cfg.latency.max_queries);
  r.finish();

  p.validate();
  if (cfg.size.n_docs == 0 || cfg.size.n_queries == 0) throw ConfigError("bench: n_docs and n_queries must be >= 1");
  for (auto k : cfg.k_list) {
    if (k == 0) throw ConfigError("eval.k_list: k must be >= 1");
  }
  if (cfg.search_depth == 0) throw ConfigError("search.depth must be >= 1");
  for (auto k : cfg.pool_ks) {
    if (k == 0) throw ConfigError("pooling.ks: pool size must be >= 1");
  }
  if (!(cfg.asr_wer >= 0.0 && cfg.asr_wer <= 1.0)) throw ConfigError("eval.asr_wer must lie in [0, 1]");
  if (cfg.latency.reps == 0) throw ConfigError("latency.reps must be >= 1");
  return cfg;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : source) out += k + "=" + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(canonical())); }

ExperimentConfig load_experiment_config(const std::optional<std::string>& config_path,
                                        const std::vector<std::string>& overrides) {
  KeyValues kv;
  if (auto path = resolve_config_path(config_path)) kv = load_config_file(*path);
  for (const auto& o : overrides) apply_override(kv, o);
  return ExperimentConfig::from_key_values(kv);
}

std::string file_checksum(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

fs::path write_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<fs::path>& outputs) {
  json j;
  j["command"] = command;
  j["config_hash"] = cfg.hash();
  j["config"] = cfg.source;
  json artifacts = json::object();
  for (const auto& p : outputs) artifacts[rel(cfg, p).generic_string()] = file_checksum(p);
  j["artifacts"] = artifacts;
  const auto dir = cfg.paths.out_dir / "manifests";
  ensure_dir(dir);
  const auto path = dir / (command + ".json");
  write_text(path, j.dump(2) + "\n");
  return path;
}

audiosynth::SyntheticBenchmark load_benchmark(const ExperimentConfig& cfg, bool with_training) {
  require_file(cfg.paths.corpus, "corpus");
  require_file(cfg.paths.queries, "queries");
  require_file(cfg.paths.qrels, "qrels");
  audiosynth::SyntheticBenchmark bench;
  bench.config = cfg.synth;
  bench.corpus = load_corpus(cfg.paths.corpus, cfg.synth.frame_dim);
  bench.queries = load_sequences(cfg.paths.queries, cfg.synth.frame_dim);
  bench.qrels = load_qrels(cfg.paths.qrels);
  if (with_training) {
    require_file(cfg.paths.train_queries, "training queries");
    require_file(cfg.paths.train_qrels, "training qrels");
    bench.train_queries = load_sequences(cfg.paths.train_queries, cfg.synth.frame_dim);
    bench.train_qrels = load_qrels(cfg.paths.train_qrels);
  }
  for (const auto& q : bench.queries) {
    for (const auto& d : bench.qrels.positives(q.id)) {
      if (!bench.corpus.contains(d)) throw DataError("qrels reference unknown doc " + d);
    }
  }
  return bench;
}

Manifest cmd_synth(const ExperimentConfig& cfg) {
  auto bench = audiosynth::build_synthetic_benchmark(cfg.synth, cfg.size, nullptr, cfg.pipeline.workers);
  for (const auto& p : {cfg.paths.corpus, cfg.paths.queries, cfg.paths.qrels, cfg.paths.train_queries,
                        cfg.paths.train_qrels}) {
    ensure_dir(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  }
  save_corpus(bench.corpus, cfg.paths.corpus);
  save_sequences(bench.queries, cfg.paths.queries);
  save_qrels(bench.qrels, cfg.paths.qrels);
  save_sequences(bench.train_queries, cfg.paths.train_queries);
  save_qrels(bench.train_qrels, cfg.paths.train_qrels);
  return finish(cfg, "synth",
                {cfg.paths.corpus, cfg.paths.queries, cfg.paths.qrels, cfg.paths.train_queries, cfg.paths.train_qrels});
}

Manifest cmd_train_selector(const ExperimentConfig& cfg) {
  auto bench = load_benchmark(cfg, true);
  const auto data = pipeline::selector_training_data(bench.corpus, bench.train_queries);
  auto trained = selector::train_selector(data, cfg.pipeline.selector_opt, cfg.pipeline.selector_options);
  ensure_dir(cfg.paths.out_dir);
  selector::save_selector(trained.model, cfg.paths.selector);

  const auto f1 = selector::token_f1(trained.model, data);
  json report;
  report["steps"] = trained.steps;
  report["best_step"] = trained.best_step;
  report["best_holdout_loss"] = trained.best_holdout_loss;
  report["precision"] = f1.precision;
  report["recall"] = f1.recall;
  report["f1"] = f1.f1;
  const auto report_path = cfg.paths.out_dir / "selector_report.json";
  write_text(report_path, report.dump(2) + "\n");
  return finish(cfg, "train-selector", {cfg.paths.selector, report_path});
}

Manifest cmd_train(const ExperimentConfig& cfg) {
  auto bench = load_benchmark(cfg, true);
  std::optional<selector::SelectorModel> sel;
  if (cfg.pipeline.use_selector && fs::is_regular_file(cfg.paths.selector)) {
    sel = selector::load_selector(cfg.paths.selector);
  }
  auto res = pipeline::train_pipeline(bench, cfg.pipeline, sel ? &*sel : nullptr);

  ensure_dir(cfg.paths.out_dir);
  encoder::save_checkpoint(res.stage1, cfg.paths.stage1_model);
  encoder::save_checkpoint(res.model, cfg.paths.model);
  const auto curve = cfg.paths.out_dir / "loss_curve.csv";
  training::write_loss_curve(res.curve, curve);
  const auto mined = cfg.paths.out_dir / "mined.jsonl";
  mining::write_mined(res.stage2_data, mined);
  const auto stats = cfg.paths.out_dir / "mining_stats.json";
  write_text(stats, mining::stats_to_json(res.mining_stats) + "\n");
  return finish(cfg, "train", {cfg.paths.stage1_model, cfg.paths.model, curve, mined, stats});
}

Manifest cmd_index(const ExperimentConfig& cfg) {
  auto model = load_model(cfg);
  require_file(cfg.paths.corpus, "corpus");
  const auto corpus = load_corpus(cfg.paths.corpus, cfg.synth.frame_dim);
  const auto fe = cfg.pipeline.front_end();
  ensure_dir(cfg.paths.out_dir);
  const auto text_path = index_path(cfg, "text");
  const auto audio_path = index_path(cfg, "audio");
  retrieval::save_index(retrieval::build_index(model, pipeline::text_view_corpus(corpus), fe, cfg.pipeline.workers),
                        text_path);
  retrieval::save_index(
      retrieval::build_index(model, pipeline::audio_view_corpus(corpus, cfg.synth), fe, cfg.pipeline.workers),
      audio_path);
  return finish(cfg, "index", {text_path, audio_path});
}

Manifest cmd_search(const ExperimentConfig& cfg) {
  auto model = load_model(cfg);
  const auto fingerprint = encoder::model_fingerprint(model);
  std::map<std::string, retrieval::EmbeddingIndex> indexes;
  for (const std::string view : {"text", "audio"}) {
    require_file(index_path(cfg, view), view + " index");
    auto idx = retrieval::load_index(index_path(cfg, view));
    if (idx.model_fingerprint != fingerprint) {
      throw DataError("index." + view + ".bin was built with a different model; rerun index");
    }
    indexes.emplace(view, std::move(idx));
  }
  require_file(cfg.paths.queries, "queries");
  const auto queries = load_sequences(cfg.paths.queries, cfg.synth.frame_dim);
  const auto fe = cfg.pipeline.front_end();
  const auto dir = runs_dir(cfg);
  ensure_dir(dir);

  std::vector<fs::path> outputs;
  for (auto s : evalx::kAllSettings) {
    std::vector<InterleavedSequence> qs(queries.size());
    parallel_for(qs.size(), cfg.pipeline.workers, [&](std::size_t i) {
      if (s == evalx::Setting::AudioToText) qs[i] = audiosynth::project_to_audio(queries[i], cfg.synth);
      else if (s == evalx::Setting::TextToAudio) qs[i] = audiosynth::project_to_text(queries[i]);
      else qs[i] = queries[i];
    });
    const auto& idx = indexes.at(targets_text(s) ? "text" : "audio");
    auto runs = evalx::run_queries(model, idx, qs, fe, cfg.search_depth, cfg.pipeline.workers);
    const auto path = dir / ("run." + evalx::file_tag(s) + ".tsv");
    write_run(runs, path);
    outputs.push_back(path);
  }
  return finish(cfg, "search", outputs);
}

Manifest cmd_eval(const ExperimentConfig& cfg) {
  require_file(cfg.paths.qrels, "qrels");
  const auto qrels = load_qrels(cfg.paths.qrels);
  evalx::MetricReport report;
  for (auto s : evalx::kAllSettings) {
    const auto path = runs_dir(cfg) / ("run." + evalx::file_tag(s) + ".tsv");
    if (!fs::is_regular_file(path)) continue;
    const auto view_qrels =
        evalx::suffix_qrels(qrels, targets_text(s) ? pipeline::kTextViewSuffix : pipeline::kAudioViewSuffix);
    report.settings[s] = evalx::metrics_from_runs(read_run(path), view_qrels, cfg.k_list);
  }
  if (report.settings.empty()) throw DataError("eval: no run files under " + runs_dir(cfg).string());

  auto outputs = write_report(cfg, evalx::metrics_table(report), "metrics");
  const auto json_path = reports_dir(cfg) / "metrics.json";
  write_text(json_path, metrics_json(report).dump(2) + "\n");
  outputs.push_back(json_path);

  if (cfg.eval_asr) {
    auto model = load_model(cfg);
    auto bench = load_benchmark(cfg, false);
    auto suite = evalx::build_eval_suite(bench, cfg.pipeline.workers);
    auto asr = evalx::evaluate_asr(model, suite, cfg.asr_wer, cfg.asr_seed, cfg.k_list, cfg.pipeline.workers);
    for (const auto& p : write_report(cfg, evalx::metrics_table(asr), "asr")) outputs.push_back(p);
  }
  return finish(cfg, "eval", outputs);
}

Manifest cmd_ablate(const ExperimentConfig& cfg) {
  auto bench = load_benchmark(cfg, true);
  auto suite = evalx::build_eval_suite(bench, cfg.pipeline.workers);
  auto result = evalx::ablate_components(bench, suite, cfg.pipeline, cfg.pipeline.workers);
  return finish(cfg, "ablate", write_report(cfg, evalx::ablation_report(result.rows), "ablation"));
}

Manifest cmd_perturb(const ExperimentConfig& cfg) {
  auto model = load_model(cfg);
  auto suite = evalx::build_eval_suite(load_benchmark(cfg, false), cfg.pipeline.workers);
  auto rows = evalx::run_perturbation_study(model, suite, cfg.pipeline.front_end(), cfg.perturb_seeds,
                                            cfg.pipeline.workers);
  return finish(cfg, "perturb", write_report(cfg, evalx::perturbation_report(rows), "perturbation"));
}

Manifest cmd_pooling(const ExperimentConfig& cfg) {
  auto model = load_model(cfg);
  auto suite = evalx::build_eval_suite(load_benchmark(cfg, false), cfg.pipeline.workers);
  auto rows = evalx::compare_selector_vs_pooling(model, suite, cfg.pool_ks, cfg.pipeline.workers);
  return finish(cfg, "pooling", write_report(cfg, evalx::pooling_report(rows), "pooling"));
}

Manifest cmd_bench(const ExperimentConfig& cfg) {
  auto model = load_model(cfg);
  auto suite = evalx::build_eval_suite(load_benchmark(cfg, false), cfg.pipeline.workers);
  std::vector<evalx::LatencyVariant> variants = {
      {"selector", &model, encoder::AudioFrontEnd::selector()},
      {"all-frames", &model, encoder::AudioFrontEnd::all_frames()}};
  for (auto k : cfg.pool_ks) variants.push_back({"pool-" + std::to_string(k), &model, encoder::AudioFrontEnd::pool(k)});
  auto rows = evalx::bench_latency(variants, suite, cfg.latency);
  return finish(cfg, "bench", write_report(cfg, evalx::latency_report(rows), "latency"));
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"synth",  "train-selector", "train",   "index",   "search",
                                                 "eval",   "ablate",         "perturb", "pooling", "bench"};
  return names;
}

Manifest run_command(const std::string& name, const ExperimentConfig& cfg) {
  if (name == "synth") return cmd_synth(cfg);
  if (name == "train-selector") return cmd_train_selector(cfg);
  if (name == "train") return cmd_train(cfg);
  if (name == "index") return cmd_index(cfg);
  if (name == "search") return cmd_search(cfg);
  if (name == "eval") return cmd_eval(cfg);
  if (name == "ablate") return cmd_ablate(cfg);
  if (name == "perturb") return cmd_perturb(cfg);
  if (name == "pooling") return cmd_pooling(cfg);
  if (name == "bench") return cmd_bench(cfg);
  throw ConfigError("unknown command: " + name);
}

int describe_error(const std::exception& e, std::string& line) {
  int code = 1;
  std::string kind = "internal";
  if (dynamic_cast<const ConfigError*>(&e)) {
    code = 2;
    kind = "config";
  } else if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    code = 3;
    kind = "data";
  } else if (dynamic_cast<const NumericError*>(&e)) {
    code = 4;
    kind = "numeric";
  }
  json j;
  j["error"] = kind;
  j["exit_code"] = code;
  j["message"] = e.what();
  line = j.dump();
  return code;
}

}  // namespace atir::cli
