#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lemcts/generator.hpp"
#include "lemcts/reward.hpp"
#include "lemcts/types.hpp"

namespace lemcts::oracle {

struct EnumerationBudget {
  int max_depth = 8;
  int max_nodes = 100000;
};

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Enumerator {
  const Problem& problem;
  const GeneratorPool& pool;
  EnumerationBudget budget;
  int nodes_visited = 0;
  std::vector<Trajectory> complete;
  std::set<std::string> seen_prefixes;  // duplicate-coverage guard

  void walk(Trajectory& prefix) {
    if (++nodes_visited > budget.max_nodes)
      throw BudgetExceeded("enumeration budget exceeded: more than " +
                           std::to_string(budget.max_nodes) + " prefixes");
    if (!seen_prefixes.insert(prefix.text()).second)
      throw std::logic_error("enumeration revisited a prefix");

    // One greedy continuation per model; identical (text, final) pairs
    // collapse because the combination space is a set at each depth.
    std::vector<Step> branches;
    RngStream unused(0);
    GenerationParams params;
    params.mode = GenMode::greedy;
    for (const GeneratorHandle& model : pool) {
      Step s = model->generate_step(problem, prefix, params, unused);
      bool dup = false;
      for (const Step& b : branches)
        if (b.text == s.text && b.final == s.final) dup = true;
      if (!dup) branches.push_back(std::move(s));
    }

    for (Step& s : branches) {
      bool final = s.final;
      prefix.steps.push_back(std::move(s));
      if (final) {
        Trajectory done = prefix;
        done.answer = extract_answer(done.text());
        complete.push_back(std::move(done));
      } else {
        if (static_cast<int>(prefix.steps.size()) >= budget.max_depth)
          throw BudgetExceeded("enumeration budget exceeded: open chain at depth " +
                               std::to_string(prefix.steps.size()));
        walk(prefix);
      }
      prefix.steps.pop_back();
    }
  }
};

}  // namespace detail

/**
 * Depth-first enumeration of every greedy model-combination chain: at each
 * prefix, each pool model contributes its greedy continuation. Only complete
 * (final-step) trajectories are returned, in deterministic model-index-major
 * order. Requires scripted handles; a chain still open at max_depth or a
 * prefix count beyond max_nodes is a hard budget error.
 */
inline std::vector<Trajectory> enumerate_space(const Problem& problem, const GeneratorPool& pool,
                                               const EnumerationBudget& budget = {}) {
  if (pool.empty()) throw std::invalid_argument("enumerate_space: empty pool");
  if (budget.max_depth < 1 || budget.max_nodes < 1)
    throw std::invalid_argument("enumerate_space: budget bounds must be >= 1");
  for (const GeneratorHandle& model : pool)
    if (model->kind() != GeneratorKind::scripted)
      throw std::invalid_argument("enumerate_space: non-deterministic handle '" +
                                  model->model_id() + "' (scripted pool required)");
  detail::Enumerator e{problem, pool, budget, 0, {}, {}};
  Trajectory prefix;
  prefix.problem_id = problem.id;
  e.walk(prefix);
  return std::move(e.complete);
}

/// Exact argmax over enumerated trajectories; ties keep enumeration order.
inline std::pair<Trajectory, double> oracle_best(const std::vector<Trajectory>& trajectories,
                                                 const Problem& problem, const PrmHandle& prm,
                                                 Aggregator agg, CallStats* stats = nullptr) {
  if (trajectories.empty()) throw std::invalid_argument("oracle_best: empty trajectory list");
  size_t best = 0;
  double best_score = 0.0;
  for (size_t i = 0; i < trajectories.size(); ++i) {
    double s = score_trajectory(prm, problem, trajectories[i], agg, stats);
    if (i == 0 || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  Trajectory out = trajectories[best];
  out.score = best_score;
  return {std::move(out), best_score};
}

/// Fixture dump of the enumerated space with per-trajectory scores.
inline nlohmann::ordered_json space_to_json(const std::vector<Trajectory>& trajectories,
                                            const Problem& problem, const PrmHandle& prm,
                                            Aggregator agg) {
  nlohmann::ordered_json doc;
  doc["problem_id"] = problem.id;
  doc["aggregator"] = to_string(agg);
  auto& arr = doc["trajectories"] = nlohmann::ordered_json::array();
  for (const Trajectory& t : trajectories) {
    nlohmann::ordered_json j;
    auto& steps = j["steps"] = nlohmann::ordered_json::array();
    for (const Step& s : t.steps)
      steps.push_back(nlohmann::ordered_json{
          {"text", s.text}, {"producer", s.producer}, {"final", s.final}});
    j["score"] = score_trajectory(prm, problem, t, agg);
    j["answer"] = t.answer ? nlohmann::ordered_json(*t.answer) : nullptr;
    arr.push_back(std::move(j));
  }
  return doc;
}

}  // namespace lemcts::oracle
