#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lemcts/answer.hpp"
#include "lemcts/http_client.hpp"
#include "lemcts/prompt.hpp"
#include "lemcts/types.hpp"
#include "lemcts/util.hpp"

namespace lemcts {

struct ScriptMissError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class GeneratorKind { scripted, http };

/**
 * A step generator: one model in the pool. Greedy mode must be a pure
 * function of (problem, prefix); nucleus mode draws from `rng`.
 */
class Generator {
public:
  virtual ~Generator() = default;
  virtual const std::string& model_id() const = 0;
  virtual GeneratorKind kind() const = 0;
  virtual Step generate_step(const Problem& problem, const Trajectory& prefix,
                             const GenerationParams& params, RngStream& rng) = 0;
};

using GeneratorHandle = std::shared_ptr<Generator>;
using GeneratorPool = std::vector<GeneratorHandle>;

namespace detail {

// Non-final steps carry exactly one trailing newline; final steps keep the
// text as authored (minus any trailing newlines).
inline std::string normalize_step_text(std::string text, bool final) {
  while (!text.empty() && text.back() == '\n') text.pop_back();
  if (text.empty()) throw std::runtime_error("empty step text");
  if (!final) text += '\n';
  return text;
}

inline Step finish_step(std::string text, std::string producer, bool backend_final) {
  bool final = backend_final || has_answer_marker(text);
  Step s;
  s.text = normalize_step_text(std::move(text), final);
  s.producer = std::move(producer);
  s.final = final;
  return s;
}

}  // namespace detail

// ============================================================================
// Scripted generator
// ============================================================================

/**
 * Candidate continuations for one (problem, prefix) point. Greedy mode takes
 * the head; nucleus mode samples proportionally to `weight`.
 */
struct ScriptEntry {
  std::string text;
  bool final = false;
  double weight = 1.0;
};

class ScriptTable {
public:
  void add(const std::string& problem_id, const std::string& prefix_text,
           std::vector<ScriptEntry> candidates) {
    if (candidates.empty())
      throw std::invalid_argument("script table: empty candidate list for " + problem_id);
    entries_[key_of(problem_id, prefix_text)] = std::move(candidates);
  }

  const std::vector<ScriptEntry>& lookup(const std::string& problem_id,
                                         const std::string& prefix_text) const {
    auto it = entries_.find(key_of(problem_id, prefix_text));
    if (it == entries_.end())
      throw ScriptMissError("script miss: problem '" + problem_id + "' prefix hash " +
                            hex64(fnv1a64(prefix_text)));
    return it->second;
  }

  bool contains(const std::string& problem_id, const std::string& prefix_text) const {
    return entries_.count(key_of(problem_id, prefix_text)) > 0;
  }

  size_t size() const { return entries_.size(); }

  // JSON format: {"problems": {<id>: [{"prefix"|"prefix_hash", "steps": [...]}]}}.
  // "prefix" is the exact text; loaders hash it, writers emit both for
  // readability.
  static ScriptTable from_json(const nlohmann::json& doc) {
    ScriptTable table;
    if (!doc.contains("problems") || !doc["problems"].is_object())
      throw std::runtime_error("script table: missing problems object");
    for (const auto& [pid, rows] : doc["problems"].items()) {
      for (const auto& row : rows) {
        std::string hash;
        if (row.contains("prefix")) {
          hash = hex64(fnv1a64(row["prefix"].get<std::string>()));
        } else if (row.contains("prefix_hash")) {
          hash = row["prefix_hash"].get<std::string>();
        } else {
          throw std::runtime_error("script table: row without prefix or prefix_hash");
        }
        std::vector<ScriptEntry> cands;
        for (const auto& s : row.at("steps")) {
          ScriptEntry e;
          e.text = s.at("text").get<std::string>();
          e.final = s.value("final", false);
          e.weight = s.value("weight", 1.0);
          if (e.weight <= 0) throw std::runtime_error("script table: weight must be > 0");
          cands.push_back(std::move(e));
        }
        if (cands.empty()) throw std::runtime_error("script table: empty steps for " + pid);
        table.entries_[pid + "#" + hash] = std::move(cands);
      }
    }
    return table;
  }

  static ScriptTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open script table: " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    return from_json(doc);
  }

private:
  static std::string key_of(const std::string& problem_id, const std::string& prefix_text) {
    return problem_id + "#" + hex64(fnv1a64(prefix_text));
  }

  std::map<std::string, std::vector<ScriptEntry>> entries_;
};

class ScriptedGenerator final : public Generator {
public:
  ScriptedGenerator(std::string model_id, ScriptTable table)
      : model_id_(std::move(model_id)), table_(std::move(table)) {}

  const std::string& model_id() const override { return model_id_; }
  GeneratorKind kind() const override { return GeneratorKind::scripted; }

  Step generate_step(const Problem& problem, const Trajectory& prefix,
                     const GenerationParams& params, RngStream& rng) override {
    const auto& cands = table_.lookup(problem.id, prefix.text());
    const ScriptEntry* pick = &cands.front();
    if (params.mode == GenMode::nucleus && cands.size() > 1) {
      double total = 0.0;
      for (const auto& c : cands) total += c.weight;
      double r = rng.next_real01() * total;
      double acc = 0.0;
      for (const auto& c : cands) {
        acc += c.weight;
        if (r < acc) {
          pick = &c;
          break;
        }
      }
    }
    return detail::finish_step(pick->text, model_id_, pick->final);
  }

  const ScriptTable& table() const { return table_; }

private:
  std::string model_id_;
  ScriptTable table_;
};

inline GeneratorHandle make_scripted_generator(std::string model_id, ScriptTable table) {
  return std::make_shared<ScriptedGenerator>(std::move(model_id), std::move(table));
}

// ============================================================================
// HTTP completion backend
// ============================================================================

struct HttpBackendConfig {
  HttpConfig http;
  std::string model;                          // backend-side model name
  std::string completions_path = "/v1/completions";
  PromptTemplate prompt_template;
};

/**
 * Completion-endpoint generator. Sends prompt = rendered template + prefix
 * text with stop=["\n"]; the response's finish reason separates "stopped at
 * newline" (non-final) from end-of-sequence (final).
 */
class HttpGenerator final : public Generator {
public:
  HttpGenerator(std::string model_id, HttpBackendConfig cfg)
      : model_id_(std::move(model_id)), cfg_(std::move(cfg)), client_(cfg_.http) {}

  const std::string& model_id() const override { return model_id_; }
  GeneratorKind kind() const override { return GeneratorKind::http; }

  Step generate_step(const Problem& problem, const Trajectory& prefix,
                     const GenerationParams& params, RngStream&) override {
    nlohmann::json req;
    req["model"] = cfg_.model;
    req["prompt"] = build_prompt(problem, cfg_.prompt_template) + prefix.text();
    req["stop"] = params.stop;
    req["max_tokens"] = params.max_tokens_per_step;
    if (params.mode == GenMode::greedy) {
      req["temperature"] = 0.0;
    } else {
      req["temperature"] = params.temperature;
      req["top_p"] = params.top_p;
    }

    nlohmann::json res = client_.post(cfg_.completions_path, req);
    if (!res.contains("choices") || !res["choices"].is_array() || res["choices"].empty())
      throw TransportError("completion response missing choices");
    const auto& choice = res["choices"][0];
    std::string text = choice.value("text", "");
    std::string finish = choice.value("finish_reason", "stop");
    if (trim(text).empty()) throw TransportError("backend returned an empty completion");
    bool final = finish == "eos" || finish == "end_of_sequence" || finish == "stop_eos";
    return detail::finish_step(std::move(text), model_id_, final);
  }

private:
  std::string model_id_;
  HttpBackendConfig cfg_;
  HttpJsonClient client_;
};

inline GeneratorHandle make_http_generator(std::string model_id, HttpBackendConfig cfg) {
  return std::make_shared<HttpGenerator>(std::move(model_id), std::move(cfg));
}

// ============================================================================
// Whole-solution decoding
// ============================================================================

/// Apply generate_step until a final step or the depth cap; the cap marks the
/// trajectory truncated.
inline Trajectory generate_solution(const GeneratorHandle& handle, const Problem& problem,
                                    const GenerationParams& params, int depth_cap,
                                    RngStream& rng, CallStats* stats = nullptr) {
  if (depth_cap < 1) throw std::invalid_argument("generate_solution: depth_cap must be >= 1");
  Trajectory t;
  t.problem_id = problem.id;
  for (int depth = 0; depth < depth_cap; ++depth) {
    Step s = handle->generate_step(problem, t, params, rng);
    if (stats) ++stats->generator_calls;
    t.steps.push_back(std::move(s));
    if (t.steps.back().final) break;
  }
  t.truncated = !t.steps.empty() && !t.steps.back().final;
  t.answer = extract_answer(t.text());
  return t;
}

}  // namespace lemcts
