#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lemcts/util.hpp"

namespace lemcts {

// ============================================================================
// Domain types
// ============================================================================

/// One benchmark question. `prompt_prefix` (few-shot examples) is prepended
/// verbatim when building prompts.
struct Problem {
  std::string id;
  std::string question;
  std::optional<std::string> gold_answer;
  std::string prompt_prefix;
};

/// One reasoning step: a sentence ending at a newline. Non-final steps end
/// with exactly one '\n'; a final step may end without one.
struct Step {
  std::string text;
  std::string producer;  // model id that generated the step
  bool final = false;

  bool operator==(const Step&) const = default;
};

/// Ordered steps from the question to some node. `truncated` means the depth
/// cap was hit before a final step appeared.
struct Trajectory {
  std::string problem_id;
  std::vector<Step> steps;
  std::optional<double> score;
  std::optional<std::string> answer;
  bool truncated = false;

  size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }

  // Concatenated step texts; the key used for script lookups and reward
  // conditioning.
  std::string text() const {
    std::string out;
    for (const auto& s : steps) out += s.text;
    return out;
  }
};

enum class GenMode { greedy, nucleus };

struct GenerationParams {
  GenMode mode = GenMode::greedy;
  double temperature = 0.5;  // nucleus only; ignored when greedy
  double top_p = 0.95;
  int max_tokens_per_step = 256;
  std::vector<std::string> stop = {"\n"};
};

enum class Backprop { standard, optimistic };
enum class Aggregator { last, min, mean, product };
enum class SelectionRule { frontier, literal };

/// Engine configuration. `n_child` unset means "pool size".
struct SearchConfig {
  int n_iter = 200;
  double C = 1.414;
  std::optional<int> n_child;    // default: number of models in the pool
  double epsilon = 0.05;         // depth-preference threshold; <= 0 disables it
  Backprop backprop = Backprop::optimistic;
  Aggregator aggregator = Aggregator::last;
  uint64_t seed = 0;
  int depth_cap = 32;
  GenerationParams generation;
  SelectionRule selection_rule = SelectionRule::frontier;
  int expansion_retry_budget = 3;

  void validate() const {
    if (n_iter <= 0) throw std::invalid_argument("search config: n_iter must be > 0");
    if (C < 0) throw std::invalid_argument("search config: C must be >= 0");
    if (n_child && *n_child <= 0)
      throw std::invalid_argument("search config: n_child must be > 0");
    if (epsilon < 0) throw std::invalid_argument("search config: epsilon must be >= 0");
    if (depth_cap <= 0) throw std::invalid_argument("search config: depth_cap must be > 0");
    if (expansion_retry_budget <= 0)
      throw std::invalid_argument("search config: expansion_retry_budget must be > 0");
  }
};

struct BaselineConfig {
  int n_samples = 9;
  int beam_width = 1;
  int candidates_per_step = 9;
  GenerationParams generation{GenMode::nucleus, 0.5, 0.95, 256, {"\n"}};
  Aggregator aggregator = Aggregator::last;
  uint64_t seed = 0;
  int depth_cap = 32;

  void validate() const {
    if (n_samples < 1) throw std::invalid_argument("baseline config: n_samples must be >= 1");
    if (beam_width < 1) throw std::invalid_argument("baseline config: beam_width must be >= 1");
    if (candidates_per_step < 1)
      throw std::invalid_argument("baseline config: candidates_per_step must be >= 1");
    if (depth_cap < 1) throw std::invalid_argument("baseline config: depth_cap must be >= 1");
  }
};

// Generator/PRM step-call accounting for run manifests.
struct CallStats {
  uint64_t generator_calls = 0;
  uint64_t prm_calls = 0;

  CallStats& operator+=(const CallStats& o) {
    generator_calls += o.generator_calls;
    prm_calls += o.prm_calls;
    return *this;
  }
};

inline const char* to_string(Backprop b) {
  return b == Backprop::standard ? "standard" : "optimistic";
}

inline const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::last: return "last";
    case Aggregator::min: return "min";
    case Aggregator::mean: return "mean";
    case Aggregator::product: return "product";
  }
  return "last";
}

inline const char* to_string(SelectionRule r) {
  return r == SelectionRule::frontier ? "frontier" : "literal";
}

inline const char* to_string(GenMode m) { return m == GenMode::greedy ? "greedy" : "nucleus"; }

inline Backprop backprop_from_string(const std::string& s) {
  if (s == "standard") return Backprop::standard;
  if (s == "optimistic") return Backprop::optimistic;
  throw std::invalid_argument("unknown backprop strategy: " + s);
}

inline Aggregator aggregator_from_string(const std::string& s) {
  if (s == "last") return Aggregator::last;
  if (s == "min") return Aggregator::min;
  if (s == "mean") return Aggregator::mean;
  if (s == "product") return Aggregator::product;
  throw std::invalid_argument("unknown aggregator: " + s);
}

inline SelectionRule selection_rule_from_string(const std::string& s) {
  if (s == "frontier") return SelectionRule::frontier;
  if (s == "literal") return SelectionRule::literal;
  throw std::invalid_argument("unknown selection rule: " + s);
}

inline GenMode gen_mode_from_string(const std::string& s) {
  if (s == "greedy") return GenMode::greedy;
  if (s == "nucleus") return GenMode::nucleus;
  throw std::invalid_argument("unknown generation mode: " + s);
}

}  // namespace lemcts
