#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "atir/cli.hpp"
#include "atir/error.hpp"

using namespace atir;
using namespace atir::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::trunc) << text; }

// A pipeline small enough to run end to end in a second or two.
std::vector<std::string> tiny_overrides(const fs::path& out) {
  return {"paths.out_dir=" + out.string(),
          "bench.n_docs=30",
          "bench.n_queries=8",
          "bench.n_train_queries=16",
          "synth.frame_dim=16",
          "model.vocab_buckets=211",
          "model.d=12",
          "model.d_out=10",
          "selector_opt.max_steps=20",
          "selector_opt.lr_scale=100",
          "stage1.epochs=1",
          "stage2.epochs=1",
          "train.stage1_pairs_per_doc=2",
          "mining.top_k_pool=10",
          "mining.max_hard_negatives=3",
          "perturb.seeds=1,2",
          "latency.reps=1",
          "latency.max_queries=2",
          "eval.asr=false"};
}

}  // namespace

TEST(CliConfig, KeyValueParsing) {
  const auto kv = parse_key_values("# comment\n a = 1 \n\nb.c=x y # trailing\n");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b.c"), "x y");
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_THROW(parse_key_values("novalue\n"), ConfigError);
}

TEST(CliConfig, JsonFlattens) {
  const auto kv = parse_json_config(R"({"bench": {"n_docs": 40, "turns_per_query": 1.5}, "eval": {"k_list": [1, 5]},
                                        "eval_flag": true, "name": "x"})");
  EXPECT_EQ(kv.at("bench.n_docs"), "40");
  EXPECT_EQ(std::stod(kv.at("bench.turns_per_query")), 1.5);
  EXPECT_EQ(kv.at("eval.k_list"), "1,5");
  EXPECT_EQ(kv.at("eval_flag"), "true");
  EXPECT_EQ(kv.at("name"), "x");
  EXPECT_THROW(parse_json_config("[1]"), ConfigError);
  EXPECT_THROW(parse_json_config("{bad"), ConfigError);
}

TEST(CliConfig, TypedFieldsAndUnknownKeys) {
  auto cfg = ExperimentConfig::from_key_values(
      {{"bench.n_docs", "40"}, {"eval.k_list", "1,3"}, {"stage1.epochs", "2"}, {"workers", "3"}});
  EXPECT_EQ(cfg.size.n_docs, 40u);
  EXPECT_EQ(cfg.k_list, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(cfg.pipeline.stage1_opt.epochs, 2u);
  EXPECT_EQ(cfg.pipeline.workers, 3u);
  EXPECT_EQ(cfg.paths.corpus, fs::path("atir_out") / "data" / "corpus.jsonl");
  EXPECT_THROW(ExperimentConfig::from_key_values({{"bench.n_dcos", "40"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_key_values({{"bench.n_docs", "-1"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_key_values({{"eval.k_list", "1,x"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_key_values({{"eval.asr", "maybe"}}), ConfigError);
}

TEST(CliConfig, HashDependsOnContentNotOrder) {
  const auto a = ExperimentConfig::from_key_values({{"bench.n_docs", "40"}, {"workers", "2"}});
  const auto b = ExperimentConfig::from_key_values({{"workers", "2"}, {"bench.n_docs", "40"}});
  const auto c = ExperimentConfig::from_key_values({{"workers", "2"}, {"bench.n_docs", "41"}});
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.canonical(), "bench.n_docs=40\nworkers=2\n");
}

TEST(CliConfig, FileResolutionAndOverrides) {
  const auto dir = fresh_dir("atir_cli_cfg");
  write_file(dir / "default.conf", "bench.n_docs = 50\nworkers = 2\n");
  write_file(dir / "other.json", R"({"bench": {"n_docs": 60}})");
  ::setenv(kConfigDirEnv, dir.c_str(), 1);
  EXPECT_EQ(resolve_config_path(std::nullopt), dir / "default.conf");
  EXPECT_EQ(resolve_config_path(std::string("other.json")), dir / "other.json");
  EXPECT_THROW(resolve_config_path(std::string("absent.conf")), ConfigError);

  auto cfg = load_experiment_config(std::nullopt, {"workers=4"});
  EXPECT_EQ(cfg.size.n_docs, 50u);
  EXPECT_EQ(cfg.pipeline.workers, 4u);
  EXPECT_EQ(load_experiment_config(std::string("other.json"), {}).size.n_docs, 60u);
  ::unsetenv(kConfigDirEnv);
  EXPECT_FALSE(resolve_config_path(std::nullopt).has_value());

  KeyValues kv;
  apply_override(kv, " a.b = 3 ");
  EXPECT_EQ(kv.at("a.b"), "3");
  EXPECT_THROW(apply_override(kv, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(kv, "=3"), ConfigError);
}

TEST(CliErrors, ExitCodesAndJsonLine) {
  std::string line;
  EXPECT_EQ(describe_error(ConfigError("c"), line), 2);
  EXPECT_EQ(nlohmann::json::parse(line).at("error"), "config");
  EXPECT_EQ(describe_error(DataError("d"), line), 3);
  EXPECT_EQ(nlohmann::json::parse(line).at("message"), "d");
  EXPECT_EQ(describe_error(NumericError("n"), line), 4);
  EXPECT_EQ(describe_error(std::runtime_error("x"), line), 1);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_THROW(run_command("nope", ExperimentConfig{}), ConfigError);
}

TEST(CliEval, HandBuiltFixture) {
  // Three docs, one query whose positive is ranked second.
  const auto out = fresh_dir("atir_cli_fixture");
  fs::create_directories(out / "data");
  fs::create_directories(out / "runs");
  write_file(out / "data" / "qrels.tsv", "q1\td2\t1\n");
  write_file(out / "runs" / "run.iat2t.tsv", "q1\td1#text\t1\t0.9\nq1\td2#text\t2\t0.8\nq1\td3#text\t3\t0.1\n");
  auto cfg = load_experiment_config(std::nullopt, {"paths.out_dir=" + out.string(), "eval.asr=false"});
  const auto m = cmd_eval(cfg);
  EXPECT_EQ(m.command, "eval");
  EXPECT_EQ(m.config_hash, cfg.hash());
  std::ifstream in(out / "reports" / "metrics.json");
  const auto j = nlohmann::json::parse(in);
  const auto& row = j.at("IAT->T");
  EXPECT_EQ(row.at("n_queries"), 1);
  EXPECT_EQ(row.at("recall").at("1").get<double>(), 0.0);
  EXPECT_EQ(row.at("recall").at("5").get<double>(), 1.0);
  EXPECT_NEAR(row.at("ndcg").at("5").get<double>(), 1.0 / std::log2(3.0), 1e-12);
  EXPECT_TRUE(m.artifacts.count("reports/metrics.tsv"));

  fs::remove(out / "runs" / "run.iat2t.tsv");
  EXPECT_THROW(cmd_eval(cfg), DataError);
}

TEST(CliPipeline, SynthIsReproducible) {
  const auto a = fresh_dir("atir_cli_synth_a");
  const auto b = fresh_dir("atir_cli_synth_b");
  const auto ma = cmd_synth(load_experiment_config(std::nullopt, tiny_overrides(a)));
  auto ob = tiny_overrides(b);
  const auto mb = cmd_synth(load_experiment_config(std::nullopt, ob));
  EXPECT_EQ(ma.artifacts, mb.artifacts);
  EXPECT_EQ(ma.artifacts.size(), 5u);
  EXPECT_TRUE(fs::exists(a / "manifests" / "synth.json"));
}

TEST(CliPipeline, EndToEnd) {
  const auto out = fresh_dir("atir_cli_e2e");
  const auto cfg = load_experiment_config(std::nullopt, tiny_overrides(out));
  EXPECT_THROW(cmd_index(cfg), DataError);  // nothing trained yet
  for (const auto& name : {"synth", "train-selector", "train", "index", "search", "eval"}) {
    const auto m = run_command(name, cfg);
    EXPECT_EQ(m.command, name);
    EXPECT_FALSE(m.artifacts.empty()) << name;
    for (const auto& [rel, sum] : m.artifacts) EXPECT_EQ(file_checksum(out / rel), sum) << rel;
  }
  for (const auto* tag : {"a2t", "t2a", "iat2t", "iat2a"}) {
    EXPECT_TRUE(fs::exists(out / "runs" / (std::string("run.") + tag + ".tsv")));
  }
  EXPECT_TRUE(fs::exists(out / "model.json"));
  EXPECT_TRUE(fs::exists(out / "loss_curve.csv"));
  EXPECT_TRUE(fs::exists(out / "mined.jsonl"));

  // Searching with a model that does not match the index is refused.
  auto other = load_experiment_config(std::nullopt, tiny_overrides(out));
  auto kv = other.source;
  kv["paths.model"] = (out / "stage1.json").string();
  EXPECT_THROW(cmd_search(ExperimentConfig::from_key_values(kv)), DataError);
}
