// lemcts command-line tool: solve single problems, run benchmarks and sweeps,
// inspect tree dumps, and cross-check the search against brute-force
// enumeration on scripted pools.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lemcts/lemcts.hpp"

namespace fs = std::filesystem;
using namespace lemcts;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoTerminal = 2;
constexpr int kExitOracleMismatch = 3;

struct LoadedConfig {
  cli::CliConfig cfg;
  std::string base_dir;
  PromptTemplate prompt;
  GeneratorPool pool;
  PrmHandle prm;
};

LoadedConfig load_environment(const std::string& config_path) {
  LoadedConfig env;
  env.cfg = cli::load_config(config_path);
  env.base_dir = fs::path(config_path).parent_path().string();
  if (!env.cfg.prompt_template_path.empty()) {
    fs::path p = env.cfg.prompt_template_path;
    if (p.is_relative() && !env.base_dir.empty()) p = fs::path(env.base_dir) / p;
    env.prompt = load_prompt_template(p.string());
  }
  env.pool = cli::build_pool(env.cfg, env.base_dir, env.prompt);
  env.prm = cli::build_prm(env.cfg, env.base_dir);
  return env;
}

harness::Dataset load_config_dataset(const LoadedConfig& env, const std::string& override_path) {
  std::string path = override_path.empty() ? env.cfg.dataset_path : override_path;
  if (path.empty()) throw cli::ConfigError("config: no dataset configured");
  fs::path p = path;
  if (override_path.empty() && p.is_relative() && !env.base_dir.empty())
    p = fs::path(env.base_dir) / p;
  return harness::load_dataset(p.string(), env.cfg.dataset_options);
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

nlohmann::ordered_json run_manifest(const std::string& method, const nlohmann::ordered_json& cfg,
                                    const char* stop_reason, double wall_ms,
                                    const CallStats& calls) {
  nlohmann::ordered_json m;
  m["method"] = method;
  m["config"] = cfg;
  m["stop_reason"] = stop_reason ? nlohmann::ordered_json(stop_reason) : nullptr;
  m["wall_ms"] = wall_ms;
  m["generator_calls"] = calls.generator_calls;
  m["prm_calls"] = calls.prm_calls;
  return m;
}

// --sweep key=v1,v2,... over numeric search-config fields.
struct SweepPoint {
  std::string key;    // empty for the no-sweep run
  std::string value;
};

std::vector<SweepPoint> parse_sweep(const std::string& spec) {
  if (spec.empty()) return {{"", ""}};
  size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size())
    throw cli::ConfigError("--sweep expects key=v1,v2,...");
  std::string key = spec.substr(0, eq);
  std::vector<SweepPoint> points;
  std::string rest = spec.substr(eq + 1);
  size_t pos = 0;
  while (pos <= rest.size()) {
    size_t comma = rest.find(',', pos);
    std::string v = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (v.empty()) throw cli::ConfigError("--sweep has an empty value");
    points.push_back({key, v});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return points;
}

void apply_sweep(SearchConfig& cfg, const SweepPoint& p) {
  if (p.key.empty()) return;
  if (p.key == "C") cfg.C = std::stod(p.value);
  else if (p.key == "n_iter") cfg.n_iter = std::stoi(p.value);
  else if (p.key == "epsilon") cfg.epsilon = std::stod(p.value);
  else if (p.key == "n_child") cfg.n_child = std::stoi(p.value);
  else if (p.key == "depth_cap") cfg.depth_cap = std::stoi(p.value);
  else if (p.key == "seed") cfg.seed = std::stoull(p.value);
  else throw cli::ConfigError("--sweep: unsupported key '" + p.key + "'");
}

int cmd_solve(const std::string& config_path, const std::string& problem_id,
              const std::string& question, const std::string& out_dir,
              std::optional<uint64_t> seed) {
  LoadedConfig env = load_environment(config_path);
  if (seed) env.cfg.search.seed = *seed;

  Problem problem;
  if (!question.empty()) {
    problem.id = "inline";
    problem.question = question;
  } else {
    harness::Dataset ds = load_config_dataset(env, "");
    bool found = false;
    for (const Problem& p : ds.problems)
      if (p.id == problem_id) {
        problem = p;
        found = true;
      }
    if (!found) throw cli::ConfigError("problem id not found in dataset: " + problem_id);
  }

  engine::SearchResult res = engine::run_search(problem, env.pool, env.prm, env.cfg.search);

  fs::path out = out_dir.empty() ? fs::path(env.cfg.output_dir) : fs::path(out_dir);
  write_file(out / ("tree-" + problem.id + ".json"), dump_tree(res.tree));
  write_file(out / ("manifest-" + problem.id + ".json"),
             run_manifest("lemcts",
                          harness::search_config_to_json(env.cfg.search, env.pool.size()),
                          engine::to_string(res.stop_reason), res.wall_ms, res.calls)
                     .dump(2) +
                 "\n");

  if (!res.best) {
    std::fprintf(stderr, "no terminal trajectory found (stop: %s, iterations: %d)\n",
                 engine::to_string(res.stop_reason), res.iterations_run);
    return kExitNoTerminal;
  }
  std::printf("problem: %s\nscore: %.6f\nanswer: %s\n", problem.id.c_str(),
              res.best->score.value_or(0.0),
              res.best->answer ? res.best->answer->c_str() : "(none)");
  for (const Step& s : res.best->steps)
    std::printf("  [%s] %s%s", s.producer.c_str(), s.text.c_str(),
                s.text.empty() || s.text.back() != '\n' ? "\n" : "");
  return kExitOk;
}

int cmd_bench(const std::string& config_path, const std::string& method_str,
              const std::string& dataset_path, const std::string& sweep_spec,
              const std::string& out_dir, std::optional<uint64_t> seed, int jobs) {
  LoadedConfig env = load_environment(config_path);
  harness::Dataset ds = load_config_dataset(env, dataset_path);
  harness::Method method = harness::method_from_string(method_str);

  fs::path out = out_dir.empty() ? fs::path(env.cfg.output_dir) : fs::path(out_dir);
  std::vector<harness::RunRecord> records;
  for (const SweepPoint& point : parse_sweep(sweep_spec)) {
    harness::BenchmarkOptions opts;
    opts.method = method;
    opts.search = env.cfg.search;
    opts.baseline = env.cfg.baseline;
    opts.prompt_template = env.prompt;
    opts.jobs = jobs;
    if (seed) {
      opts.search.seed = *seed;
      opts.baseline.seed = *seed;
    }
    apply_sweep(opts.search, point);

    std::string label = std::string(harness::to_string(method));
    if (!point.key.empty()) label += "[" + point.key + "=" + point.value + "]";
    opts.checkpoint_dir = (out / "checkpoints" / label).string();

    harness::RunRecord rec = harness::run_benchmark(ds, env.pool, env.prm, opts);
    rec.method = label;
    for (auto& row : rec.rows) row.method = label;
    write_file(out / ("run-" + label + ".json"), harness::record_to_json(rec).dump(2) + "\n");
    std::printf("%s: accuracy %.4f (hash %s)\n", label.c_str(), rec.accuracy,
                harness::record_hash(rec).c_str());
    records.push_back(std::move(rec));
  }
  write_file(out / "summary.csv", harness::metrics_csv(records));
  std::printf("wrote %s\n", (out / "summary.csv").string().c_str());
  return kExitOk;
}

int cmd_stats(const std::string& dump_path, const std::string& out_path) {
  std::ifstream in(dump_path);
  if (!in) throw std::runtime_error("cannot open tree dump: " + dump_path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error("malformed tree dump: " + dump_path);
  SearchTree tree = tree_from_json(doc);
  engine::LeafStats stats = engine::leaf_stats(tree);

  std::string csv = "leaf_id,depth,reward\n";
  for (const engine::LeafInfo& leaf : stats.per_leaf)
    csv += std::to_string(leaf.id) + "," + std::to_string(leaf.depth) + "," +
           harness::format_double(leaf.reward) + "\n";
  csv += "mean," + harness::format_double(stats.mean_leaf_depth) + "," +
         harness::format_double(stats.mean_leaf_reward) + "\n";
  if (out_path.empty())
    std::fputs(csv.c_str(), stdout);
  else
    write_file(out_path, csv);
  return kExitOk;
}

int cmd_oracle(const std::string& config_path, const std::string& problem_id, bool verify,
               const std::string& out_dir, int max_depth, int max_nodes,
               std::optional<uint64_t> seed) {
  LoadedConfig env = load_environment(config_path);
  if (seed) env.cfg.search.seed = *seed;
  if (!cli::pool_is_scripted(env.pool))
    throw cli::ConfigError("oracle requires a fully scripted pool; refusing live endpoints");

  harness::Dataset ds = load_config_dataset(env, "");
  const Problem* problem = nullptr;
  for (const Problem& p : ds.problems)
    if (p.id == problem_id) problem = &p;
  if (!problem) throw cli::ConfigError("problem id not found in dataset: " + problem_id);

  oracle::EnumerationBudget budget{max_depth, max_nodes};
  std::vector<Trajectory> space = oracle::enumerate_space(*problem, env.pool, budget);
  auto [best, best_score] =
      oracle::oracle_best(space, *problem, env.prm, env.cfg.search.aggregator);

  fs::path out = out_dir.empty() ? fs::path(env.cfg.output_dir) : fs::path(out_dir);
  write_file(out / ("space-" + problem->id + ".json"),
             oracle::space_to_json(space, *problem, env.prm, env.cfg.search.aggregator).dump(2) +
                 "\n");
  std::printf("enumerated %zu complete trajectories; optimum score %.6f\n", space.size(),
              best_score);

  if (!verify) return kExitOk;
  engine::SearchResult res = engine::run_search(*problem, env.pool, env.prm, env.cfg.search);
  double got = res.best && res.best->score ? *res.best->score : -1.0;
  if (!res.best || std::fabs(got - best_score) > 1e-9) {
    std::fprintf(stderr, "verify FAILED: search best %.12f vs oracle %.12f\n", got, best_score);
    return kExitOracleMismatch;
  }
  std::printf("verify ok: search best matches oracle optimum (%.12f)\n", best_score);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"process-level language-model ensemble search"};
  app.require_subcommand(1);

  std::string config_path, problem_id, question, dataset_path, sweep_spec, out_dir, dump_path,
      out_path, method = "lemcts";
  std::optional<uint64_t> seed;
  int jobs = 1, max_depth = 12, max_nodes = 200000;
  bool verify = false;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the configured seed");
  };

  CLI::App* solve = app.add_subcommand("solve", "search one problem, print the best trajectory");
  solve->add_option("--config", config_path, "config file")->required();
  solve->add_option("--problem-id", problem_id, "problem id from the configured dataset");
  solve->add_option("--question", question, "inline question text");
  solve->add_option("--out", out_dir, "output directory (tree dump + manifest)");
  add_seed(solve);

  CLI::App* bench = app.add_subcommand("bench", "run a method over a dataset, write records + CSV");
  bench->add_option("--config", config_path, "config file")->required();
  bench->add_option("--method", method, "greedy|sc|bon|bs|boe|ebs|lemcts");
  bench->add_option("--dataset", dataset_path, "dataset path override");
  bench->add_option("--sweep", sweep_spec, "key=v1,v2,... sweep over a search parameter");
  bench->add_option("--out", out_dir, "output directory");
  bench->add_option("--jobs", jobs, "parallel problems");
  add_seed(bench);

  CLI::App* stats = app.add_subcommand("stats", "leaf reward/depth table from a tree dump");
  stats->add_option("dump", dump_path, "tree dump path")->required();
  stats->add_option("--out", out_path, "write CSV here instead of stdout");

  CLI::App* orc = app.add_subcommand("oracle", "enumerate the combination space (scripted pools)");
  orc->add_option("--config", config_path, "config file")->required();
  orc->add_option("--problem-id", problem_id, "problem id")->required();
  orc->add_flag("--verify", verify, "also run the search and require score equality");
  orc->add_option("--out", out_dir, "output directory");
  orc->add_option("--max-depth", max_depth, "enumeration depth budget");
  orc->add_option("--max-nodes", max_nodes, "enumeration node budget");
  add_seed(orc);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      if (problem_id.empty() == question.empty())
        throw cli::ConfigError("solve needs exactly one of --problem-id or --question");
      return cmd_solve(config_path, problem_id, question, out_dir, seed);
    }
    if (bench->parsed())
      return cmd_bench(config_path, method, dataset_path, sweep_spec, out_dir, seed, jobs);
    if (stats->parsed()) return cmd_stats(dump_path, out_path);
    if (orc->parsed())
      return cmd_oracle(config_path, problem_id, verify, out_dir, max_depth, max_nodes, seed);
  } catch (const cli::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
