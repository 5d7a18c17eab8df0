#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lemcts/answer.hpp"
#include "lemcts/baselines.hpp"
#include "lemcts/engine.hpp"
#include "lemcts/prompt.hpp"
#include "lemcts/types.hpp"

namespace lemcts::harness {

// ============================================================================
// Datasets
// ============================================================================

struct DatasetOptions {
  std::string name;  // defaults to the file stem
  std::string question_field = "question";
  std::string answer_field = "answer";
  std::string id_field = "id";
  std::string prompt_prefix_field = "prompt_prefix";
};

struct Dataset {
  std::string name;
  std::string source_path;
  std::vector<Problem> problems;
};

/// JSONL loader: one problem per line. Parse failures report the line number.
inline Dataset load_dataset(const std::string& path, const DatasetOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  Dataset ds;
  ds.source_path = path;
  ds.name = opts.name.empty() ? std::filesystem::path(path).stem().string() : opts.name;

  std::string line;
  int lineno = 0;
  std::vector<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded())
      throw std::runtime_error("dataset " + path + ": malformed JSON at line " +
                               std::to_string(lineno));
    if (!row.contains(opts.question_field))
      throw std::runtime_error("dataset " + path + ": line " + std::to_string(lineno) +
                               " missing field '" + opts.question_field + "'");
    Problem p;
    p.question = row[opts.question_field].get<std::string>();
    if (p.question.empty())
      throw std::runtime_error("dataset " + path + ": line " + std::to_string(lineno) +
                               " has an empty question");
    p.id = row.contains(opts.id_field) ? row[opts.id_field].get<std::string>()
                                       : ds.name + "-" + std::to_string(lineno);
    if (row.contains(opts.answer_field) && !row[opts.answer_field].is_null())
      p.gold_answer = normalize_answer(row[opts.answer_field].get<std::string>());
    if (row.contains(opts.prompt_prefix_field))
      p.prompt_prefix = row[opts.prompt_prefix_field].get<std::string>();
    for (const auto& id : seen_ids)
      if (id == p.id)
        throw std::runtime_error("dataset " + path + ": duplicate problem id '" + p.id + "'");
    seen_ids.push_back(p.id);
    ds.problems.push_back(std::move(p));
  }
  if (ds.problems.empty()) throw std::runtime_error("dataset " + path + ": no problems");
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path,
                         const DatasetOptions& opts = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  for (const Problem& p : ds.problems) {
    nlohmann::ordered_json row;
    row[opts.id_field] = p.id;
    row[opts.question_field] = p.question;
    if (p.gold_answer) row[opts.answer_field] = *p.gold_answer;
    if (!p.prompt_prefix.empty()) row[opts.prompt_prefix_field] = p.prompt_prefix;
    out << row.dump() << "\n";
  }
}

// ============================================================================
// Methods and run records
// ============================================================================

enum class Method { greedy, sc, bon, bs, boe, ebs, lemcts };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::greedy: return "greedy";
    case Method::sc: return "sc";
    case Method::bon: return "bon";
    case Method::bs: return "bs";
    case Method::boe: return "boe";
    case Method::ebs: return "ebs";
    case Method::lemcts: return "lemcts";
  }
  return "greedy";
}

inline Method method_from_string(const std::string& s) {
  if (s == "greedy") return Method::greedy;
  if (s == "sc") return Method::sc;
  if (s == "bon") return Method::bon;
  if (s == "bs") return Method::bs;
  if (s == "boe") return Method::boe;
  if (s == "ebs") return Method::ebs;
  if (s == "lemcts") return Method::lemcts;
  throw std::invalid_argument("unknown method: " + s);
}

struct ProblemRow {
  std::string problem_id;
  std::string method;
  std::vector<Step> trajectory;
  std::optional<double> score;
  std::optional<std::string> answer;
  bool correct = false;
  double wall_ms = 0.0;
  uint64_t generator_calls = 0;
  uint64_t prm_calls = 0;
  std::optional<double> mean_leaf_reward;  // search runs only
  std::optional<double> mean_leaf_depth;
  std::optional<std::string> stop_reason;
  std::optional<std::string> error;
};

struct RunRecord {
  nlohmann::ordered_json config;  // effective configuration echo
  std::string method;
  std::string dataset;
  std::string prompt_template;
  std::vector<ProblemRow> rows;  // dataset order
  double accuracy = 0.0;
};

inline nlohmann::ordered_json row_to_json(const ProblemRow& r) {
  nlohmann::ordered_json j;
  j["problem_id"] = r.problem_id;
  j["method"] = r.method;
  auto& steps = j["trajectory"] = nlohmann::ordered_json::array();
  for (const Step& s : r.trajectory) {
    steps.push_back(nlohmann::ordered_json{
        {"text", s.text}, {"producer", s.producer}, {"final", s.final}});
  }
  j["score"] = r.score ? nlohmann::ordered_json(*r.score) : nlohmann::ordered_json(nullptr);
  j["answer"] = r.answer ? nlohmann::ordered_json(*r.answer) : nlohmann::ordered_json(nullptr);
  j["correct"] = r.correct;
  j["wall_ms"] = r.wall_ms;
  j["generator_calls"] = r.generator_calls;
  j["prm_calls"] = r.prm_calls;
  j["mean_leaf_reward"] =
      r.mean_leaf_reward ? nlohmann::ordered_json(*r.mean_leaf_reward) : nullptr;
  j["mean_leaf_depth"] = r.mean_leaf_depth ? nlohmann::ordered_json(*r.mean_leaf_depth) : nullptr;
  j["stop_reason"] = r.stop_reason ? nlohmann::ordered_json(*r.stop_reason) : nullptr;
  j["error"] = r.error ? nlohmann::ordered_json(*r.error) : nullptr;
  return j;
}

inline ProblemRow row_from_json(const nlohmann::json& j) {
  ProblemRow r;
  r.problem_id = j.at("problem_id").get<std::string>();
  r.method = j.at("method").get<std::string>();
  for (const auto& s : j.at("trajectory")) {
    Step step;
    step.text = s.at("text").get<std::string>();
    step.producer = s.at("producer").get<std::string>();
    step.final = s.at("final").get<bool>();
    r.trajectory.push_back(std::move(step));
  }
  if (!j.at("score").is_null()) r.score = j.at("score").get<double>();
  if (!j.at("answer").is_null()) r.answer = j.at("answer").get<std::string>();
  r.correct = j.at("correct").get<bool>();
  r.wall_ms = j.at("wall_ms").get<double>();
  r.generator_calls = j.at("generator_calls").get<uint64_t>();
  r.prm_calls = j.at("prm_calls").get<uint64_t>();
  if (!j.at("mean_leaf_reward").is_null())
    r.mean_leaf_reward = j.at("mean_leaf_reward").get<double>();
  if (!j.at("mean_leaf_depth").is_null())
    r.mean_leaf_depth = j.at("mean_leaf_depth").get<double>();
  if (!j.at("stop_reason").is_null()) r.stop_reason = j.at("stop_reason").get<std::string>();
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  return r;
}

inline nlohmann::ordered_json record_to_json(const RunRecord& rec) {
  nlohmann::ordered_json doc;
  doc["method"] = rec.method;
  doc["dataset"] = rec.dataset;
  doc["prompt_template"] = rec.prompt_template;
  doc["config"] = rec.config;
  doc["accuracy"] = rec.accuracy;
  auto& rows = doc["rows"] = nlohmann::ordered_json::array();
  for (const ProblemRow& r : rec.rows) rows.push_back(row_to_json(r));
  return doc;
}

/**
 * Determinism fingerprint of a run record: FNV-1a over the JSON with wall
 * clock times zeroed. Two runs with the same seed and scripted backends must
 * agree on this hash even though their timings differ.
 */
inline std::string record_hash(const RunRecord& rec) {
  nlohmann::ordered_json doc = record_to_json(rec);
  for (auto& row : doc["rows"]) row["wall_ms"] = 0.0;
  return hex64(fnv1a64(doc.dump()));
}

// ============================================================================
// Benchmark runner
// ============================================================================

struct BenchmarkOptions {
  Method method = Method::lemcts;
  SearchConfig search;
  BaselineConfig baseline;
  PromptTemplate prompt_template;
  std::string checkpoint_dir;  // empty disables checkpointing
  int jobs = 1;
};

namespace detail {

inline uint64_t options_fingerprint(const BenchmarkOptions& opts);

inline ProblemRow solve_problem(const Problem& problem, const GeneratorPool& pool,
                                const PrmHandle& prm, const BenchmarkOptions& opts) {
  ProblemRow row;
  row.problem_id = problem.id;
  row.method = to_string(opts.method);
  auto t0 = std::chrono::steady_clock::now();
  CallStats stats;
  try {
    std::optional<Trajectory> best;
    switch (opts.method) {
      case Method::greedy:
        best = baselines::greedy(problem, pool.at(0), opts.baseline.depth_cap, &stats);
        break;
      case Method::sc: {
        auto sc = baselines::self_consistency(problem, pool.at(0), opts.baseline, &stats);
        row.answer = sc.answer;
        break;
      }
      case Method::bon:
        best = baselines::best_of_n(problem, pool.at(0), prm, opts.baseline, &stats);
        break;
      case Method::bs:
        best = baselines::beam_search(problem, pool.at(0), prm, opts.baseline, &stats);
        break;
      case Method::boe:
        best = baselines::best_of_ensemble(problem, pool, prm, opts.baseline, &stats);
        break;
      case Method::ebs:
        best = baselines::ensemble_beam_search(problem, pool, prm, opts.baseline, &stats);
        break;
      case Method::lemcts: {
        engine::SearchResult res = engine::run_search(problem, pool, prm, opts.search);
        stats += res.calls;
        row.stop_reason = engine::to_string(res.stop_reason);
        if (res.tree.size() > 1) {
          engine::LeafStats ls = engine::leaf_stats(res.tree);
          row.mean_leaf_reward = ls.mean_leaf_reward;
          row.mean_leaf_depth = ls.mean_leaf_depth;
        }
        if (!res.best) throw std::runtime_error("no terminal trajectory found");
        best = std::move(res.best);
        break;
      }
    }
    if (best) {
      row.trajectory = best->steps;
      row.score = best->score;
      row.answer = best->answer ? best->answer : extract_answer(best->text());
    }
    if (problem.gold_answer) row.correct = grade(row.answer, *problem.gold_answer);
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.generator_calls = stats.generator_calls;
  row.prm_calls = stats.prm_calls;
  row.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

inline std::filesystem::path checkpoint_path(const BenchmarkOptions& opts,
                                             const std::string& problem_id) {
  return std::filesystem::path(opts.checkpoint_dir) /
         (std::string(to_string(opts.method)) + "-" + hex64(fnv1a64(problem_id)) + ".json");
}

inline std::optional<ProblemRow> load_checkpoint(const BenchmarkOptions& opts,
                                                 const std::string& problem_id) {
  if (opts.checkpoint_dir.empty()) return std::nullopt;
  std::ifstream in(checkpoint_path(opts, problem_id));
  if (!in) return std::nullopt;
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) return std::nullopt;
  if (doc.value("fingerprint", uint64_t{0}) != options_fingerprint(opts)) return std::nullopt;
  try {
    return row_from_json(doc.at("row"));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline void save_checkpoint(const BenchmarkOptions& opts, const ProblemRow& row) {
  if (opts.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(opts.checkpoint_dir);
  nlohmann::ordered_json doc;
  doc["fingerprint"] = options_fingerprint(opts);
  doc["row"] = row_to_json(row);
  std::ofstream out(checkpoint_path(opts, row.problem_id), std::ios::binary);
  out << doc.dump(2) << "\n";
}

}  // namespace detail

inline nlohmann::ordered_json search_config_to_json(const SearchConfig& c, size_t pool_size) {
  nlohmann::ordered_json j;
  j["n_iter"] = c.n_iter;
  j["C"] = c.C;
  j["n_child"] = c.n_child ? *c.n_child : static_cast<int>(pool_size);
  j["epsilon"] = c.epsilon;
  j["backprop"] = to_string(c.backprop);
  j["aggregator"] = to_string(c.aggregator);
  j["seed"] = c.seed;
  j["depth_cap"] = c.depth_cap;
  j["selection_rule"] = to_string(c.selection_rule);
  j["expansion_retry_budget"] = c.expansion_retry_budget;
  j["generation"] = {{"mode", to_string(c.generation.mode)},
                     {"temperature", c.generation.temperature},
                     {"top_p", c.generation.top_p},
                     {"max_tokens_per_step", c.generation.max_tokens_per_step},
                     {"stop", c.generation.stop}};
  return j;
}

inline nlohmann::ordered_json baseline_config_to_json(const BaselineConfig& c) {
  nlohmann::ordered_json j;
  j["n_samples"] = c.n_samples;
  j["beam_width"] = c.beam_width;
  j["candidates_per_step"] = c.candidates_per_step;
  j["aggregator"] = to_string(c.aggregator);
  j["seed"] = c.seed;
  j["depth_cap"] = c.depth_cap;
  j["generation"] = {{"mode", to_string(c.generation.mode)},
                     {"temperature", c.generation.temperature},
                     {"top_p", c.generation.top_p},
                     {"max_tokens_per_step", c.generation.max_tokens_per_step},
                     {"stop", c.generation.stop}};
  return j;
}

namespace detail {

inline uint64_t options_fingerprint(const BenchmarkOptions& opts) {
  nlohmann::ordered_json j;
  j["method"] = to_string(opts.method);
  j["search"] = search_config_to_json(opts.search, 0);
  j["baseline"] = baseline_config_to_json(opts.baseline);
  j["prompt_template"] = opts.prompt_template.text;
  return fnv1a64(j.dump());
}

}  // namespace detail

/**
 * Run one method over a dataset with a bounded worker pool. Rows keep dataset
 * order regardless of scheduling; per-problem failures are recorded and the
 * run continues. With a checkpoint directory set, finished problems are
 * persisted and reused on resume as long as the configuration fingerprint
 * matches.
 */
inline RunRecord run_benchmark(const Dataset& dataset, const GeneratorPool& pool,
                               const PrmHandle& prm, const BenchmarkOptions& opts) {
  if (pool.empty()) throw std::invalid_argument("run_benchmark: empty pool");
  opts.search.validate();
  opts.baseline.validate();

  RunRecord rec;
  rec.method = to_string(opts.method);
  rec.dataset = dataset.name;
  rec.prompt_template = opts.prompt_template.text;
  rec.config = nlohmann::ordered_json{
      {"method", rec.method},
      {"dataset", dataset.source_path},
      {"search", search_config_to_json(opts.search, pool.size())},
      {"baseline", baseline_config_to_json(opts.baseline)},
  };
  rec.rows.resize(dataset.problems.size());

  std::atomic<size_t> next{0};
  std::mutex io_mutex;
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= dataset.problems.size()) return;
      const Problem& problem = dataset.problems[i];
      std::optional<ProblemRow> row = detail::load_checkpoint(opts, problem.id);
      if (!row) {
        row = detail::solve_problem(problem, pool, prm, opts);
        std::lock_guard<std::mutex> lock(io_mutex);
        detail::save_checkpoint(opts, *row);
      }
      rec.rows[i] = std::move(*row);
    }
  };

  int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  size_t correct = 0;
  for (const ProblemRow& r : rec.rows)
    if (r.correct) ++correct;
  rec.accuracy = dataset.problems.empty()
                     ? 0.0
                     : static_cast<double>(correct) / static_cast<double>(dataset.problems.size());
  return rec;
}

// ============================================================================
// Metrics summary CSV
// ============================================================================

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

/// One summary line per record: means over rows, blank leaf columns for
/// methods that do not build trees.
inline std::string metrics_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << "dataset,method,accuracy,mean_leaf_reward,mean_leaf_depth,wall_ms_mean,"
         "generator_calls_mean,prm_calls_mean\n";
  for (const RunRecord& rec : records) {
    double wall = 0.0, gen = 0.0, prm = 0.0, lr = 0.0, ld = 0.0;
    size_t leaf_rows = 0;
    for (const ProblemRow& r : rec.rows) {
      wall += r.wall_ms;
      gen += static_cast<double>(r.generator_calls);
      prm += static_cast<double>(r.prm_calls);
      if (r.mean_leaf_reward) {
        lr += *r.mean_leaf_reward;
        ld += *r.mean_leaf_depth;
        ++leaf_rows;
      }
    }
    double n = rec.rows.empty() ? 1.0 : static_cast<double>(rec.rows.size());
    out << rec.dataset << "," << rec.method << "," << format_double(rec.accuracy) << ",";
    if (leaf_rows > 0)
      out << format_double(lr / static_cast<double>(leaf_rows)) << ","
          << format_double(ld / static_cast<double>(leaf_rows)) << ",";
    else
      out << ",,";
    out << format_double(wall / n) << "," << format_double(gen / n) << ","
        << format_double(prm / n) << "\n";
  }
  return out.str();
}

}  // namespace lemcts::harness
