#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lemcts/generator.hpp"
#include "lemcts/reward.hpp"
#include "lemcts/tree.hpp"
#include "lemcts/types.hpp"

namespace lemcts::engine {

enum class StopReason { iteration_budget, exhausted };

inline const char* to_string(StopReason r) {
  return r == StopReason::iteration_budget ? "iteration_budget" : "exhausted";
}

struct SearchResult {
  SearchTree tree;
  std::optional<Trajectory> best;
  std::vector<std::pair<Trajectory, double>> all_terminal;  // creation order
  int iterations_run = 0;
  StopReason stop_reason = StopReason::iteration_budget;
  CallStats calls;
  double wall_ms = 0.0;
};

// Test/diagnostic hooks; both optional.
struct SearchHooks {
  std::function<void(const SearchTree&, NodeId)> before_expansion;
  std::function<void(const SearchTree&, int iteration)> after_iteration;
};

// ============================================================================
// Primitive steps
// ============================================================================

/// Upper confidence bound: value plus C-scaled exploration bonus.
inline double uct_score(double value, int visits, int parent_visits, double c) {
  if (visits < 1 || parent_visits < 1)
    throw std::invalid_argument("uct_score: visit counts must be >= 1");
  return value + c * std::sqrt(std::log(static_cast<double>(parent_visits)) /
                               static_cast<double>(visits));
}

namespace detail {

inline int effective_n_child(const SearchConfig& cfg, size_t pool_size) {
  return cfg.n_child ? *cfg.n_child : static_cast<int>(pool_size);
}

// Argmax by UCT over `candidates` (children of `parent`); ties go to the
// lowest creation id, which candidate order already provides.
inline NodeId best_uct_child(const SearchTree& tree, const Node& parent,
                             const std::vector<NodeId>& candidates, double c) {
  NodeId best = kNoNode;
  double best_score = 0.0;
  for (NodeId id : candidates) {
    const Node& child = tree.node(id);
    double score = uct_score(child.value, child.visits, parent.visits, c);
    if (best == kNoNode || score > best_score) {
      best = id;
      best_score = score;
    }
  }
  return best;
}

}  // namespace detail

/**
 * Pick the expansion point.
 *
 * frontier rule: walk down through fully-expanded nodes along the best-UCT
 * child (terminal and dead children excluded) and return the first node that
 * can still take a child. A fully-expanded node with no selectable children
 * is a dead end: nothing below it can change, so it is marked dead and the
 * walk restarts.
 *
 * literal rule: the walk only moves into children that are themselves
 * expandable and stops at childless nodes; an empty candidate set marks the
 * current node dead and restarts. Kept for fidelity experiments — it can
 * strand expandable descendants behind a fully-expanded child.
 *
 * Returns nothing when the root goes dead (the tree is exhausted).
 */
inline std::optional<NodeId> select(SearchTree& tree, const SearchConfig& cfg, int n_child) {
  while (!tree.node(tree.root()).dead) {
    NodeId cur = tree.root();
    bool restart = false;
    while (!restart) {
      Node& n = tree.node(cur);
      if (cfg.selection_rule == SelectionRule::frontier) {
        if (!is_fully_expanded(tree, cur, n_child, cfg.epsilon)) return cur;
        std::vector<NodeId> candidates;
        for (NodeId c : n.children) {
          const Node& child = tree.node(c);
          if (!child.terminal && !child.dead) candidates.push_back(c);
        }
        if (candidates.empty()) {
          n.dead = true;
          restart = true;
          continue;
        }
        cur = detail::best_uct_child(tree, n, candidates, cfg.C);
      } else {
        if (n.children.empty()) return cur;
        std::vector<NodeId> candidates;
        for (NodeId c : n.children) {
          const Node& child = tree.node(c);
          if (!child.terminal && !child.dead &&
              !is_fully_expanded(tree, c, n_child, cfg.epsilon))
            candidates.push_back(c);
        }
        if (candidates.empty()) {
          n.dead = true;
          restart = true;
          continue;
        }
        cur = detail::best_uct_child(tree, n, candidates, cfg.C);
      }
    }
  }
  return std::nullopt;
}

/**
 * Random model pick, without replacement against the models this node's
 * children already used. Once every pool model has been used the exclusion
 * resets, so n_child > L keeps cycling through the pool.
 */
inline const GeneratorHandle& pick_model(const SearchTree& tree, NodeId id,
                                         const GeneratorPool& pool, RngStream& rng) {
  if (pool.empty()) throw std::invalid_argument("pick_model: empty pool");
  const Node& n = tree.node(id);
  size_t cycle_start = n.children.size() - (n.children.size() % pool.size());
  std::vector<size_t> available;
  for (size_t i = 0; i < pool.size(); ++i) {
    bool used = false;
    for (size_t k = cycle_start; k < n.children.size(); ++k) {
      const Node& child = tree.node(n.children[k]);
      if (child.step && child.step->producer == pool[i]->model_id()) {
        used = true;
        break;
      }
    }
    if (!used) available.push_back(i);
  }
  if (available.empty())  // children from outside the pool; fall back to uniform
    return pool[rng.next_index(pool.size())];
  return pool[available[rng.next_index(available.size())]];
}

/**
 * Add one child to `id`: pick a model, greedily decode the next step (stop at
 * newline), score it with the PRM, and seed the child with value = reward,
 * visits = 1. A non-final step at the depth cap makes the child a truncated
 * terminal.
 */
inline NodeId expand(SearchTree& tree, NodeId id, const GeneratorPool& pool, const PrmHandle& prm,
                     const Problem& problem, const SearchConfig& cfg, RngStream& rng,
                     CallStats* stats = nullptr) {
  const Node& n = tree.node(id);
  if (n.terminal) throw std::invalid_argument("expand: node is terminal");
  if (n.dead) throw std::invalid_argument("expand: node is dead");

  const GeneratorHandle& model = pick_model(tree, id, pool, rng);
  Trajectory prefix = path_of(tree, id, problem.id);

  GenerationParams params = cfg.generation;
  params.mode = GenMode::greedy;  // expansion is always a greedy decode
  Step step = model->generate_step(problem, prefix, params, rng);
  if (stats) ++stats->generator_calls;

  double reward = score_step(prm, problem, prefix, step, stats);
  NodeId child = create_node(tree, id, std::move(step), reward);
  Node& c = tree.node(child);
  if (!c.terminal && c.depth >= cfg.depth_cap) {
    c.terminal = true;
    c.truncated = true;
  }
  return child;
}

/**
 * Push the new leaf's statistics up the ancestor chain (child-to-root order;
 * the leaf itself keeps value = reward, visits = 1). Standard strategy folds
 * the reward into a running average; the optimistic strategy folds in the
 * ancestor's current best child value instead.
 */
inline void backpropagate(SearchTree& tree, NodeId leaf, double reward, Backprop strategy) {
  NodeId cur = tree.node(leaf).parent;
  while (cur != kNoNode) {
    Node& n = tree.node(cur);
    n.visits += 1;
    double sample = strategy == Backprop::standard ? reward : max_child_value(tree, n);
    n.value = (static_cast<double>(n.visits - 1) * n.value + sample) /
              static_cast<double>(n.visits);
    cur = n.parent;
  }
}

// ============================================================================
// Search loop
// ============================================================================

namespace detail {

inline std::vector<double> path_rewards(const SearchTree& tree, NodeId leaf) {
  std::vector<double> rewards;
  for (NodeId cur = leaf; cur != kNoNode; cur = tree.node(cur).parent) {
    const Node& n = tree.node(cur);
    if (n.reward) rewards.push_back(*n.reward);
  }
  std::reverse(rewards.begin(), rewards.end());
  return rewards;
}

}  // namespace detail

/**
 * Full search: up to n_iter select/expand/evaluate/backpropagate cycles,
 * stopping early when nothing expandable remains. Terminal trajectories are
 * collected in creation order and ranked by the configured aggregator over
 * their per-step rewards; truncated ones are rank-eligible only when no clean
 * terminal exists. Deterministic given the seed and deterministic handles.
 */
inline SearchResult run_search(const Problem& problem, const GeneratorPool& pool,
                               const PrmHandle& prm, const SearchConfig& cfg,
                               const SearchHooks& hooks = {}) {
  cfg.validate();
  if (pool.empty()) throw std::invalid_argument("run_search: empty pool");
  const int n_child = detail::effective_n_child(cfg, pool.size());

  auto t0 = std::chrono::steady_clock::now();
  RngStream rng(mix_seed(cfg.seed, problem.id));

  SearchResult result;
  SearchTree& tree = result.tree;
  create_node(tree, std::nullopt, std::nullopt);

  for (int iter = 1; iter <= cfg.n_iter; ++iter) {
    std::optional<NodeId> target = select(tree, cfg, n_child);
    if (!target) {
      result.stop_reason = StopReason::exhausted;
      break;
    }
    if (hooks.before_expansion) hooks.before_expansion(tree, *target);

    bool expanded = false;
    for (int attempt = 0; attempt < cfg.expansion_retry_budget && !expanded; ++attempt) {
      try {
        NodeId child = expand(tree, *target, pool, prm, problem, cfg, rng, &result.calls);
        backpropagate(tree, child, *tree.node(child).reward, cfg.backprop);
        expanded = true;
      } catch (const TransportError&) {
        // transient backend fault; retry within this iteration
      } catch (const ScriptMissError&) {
        break;  // deterministic miss, retrying cannot help
      }
    }
    if (!expanded) tree.node(*target).dead = true;

    result.iterations_run = iter;
    if (hooks.after_iteration) hooks.after_iteration(tree, iter);
  }

  // Extraction: clean terminals first, truncated ones only as a fallback.
  std::vector<NodeId> leaves;
  for (const Node& n : tree.nodes())
    if (n.terminal && !n.truncated) leaves.push_back(n.id);
  if (leaves.empty())
    for (const Node& n : tree.nodes())
      if (n.terminal && n.truncated) leaves.push_back(n.id);

  for (NodeId id : leaves) {
    Trajectory t = path_of(tree, id, problem.id);
    double score = aggregate(detail::path_rewards(tree, id), cfg.aggregator);
    t.score = score;
    t.answer = extract_answer(t.text());
    result.all_terminal.emplace_back(std::move(t), score);
  }
  if (!result.all_terminal.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < result.all_terminal.size(); ++i)
      if (result.all_terminal[i].second > result.all_terminal[best].second) best = i;
    result.best = result.all_terminal[best].first;
  }

  result.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ============================================================================
// Diagnostics
// ============================================================================

struct LeafInfo {
  NodeId id = kNoNode;
  int depth = 0;
  double reward = 0.0;
};

struct LeafStats {
  double mean_leaf_reward = 0.0;
  double mean_leaf_depth = 0.0;
  std::vector<LeafInfo> per_leaf;
};

/// Reward/depth profile of the tree's leaves (nodes with zero children).
inline LeafStats leaf_stats(const SearchTree& tree) {
  if (tree.size() <= 1) throw std::invalid_argument("leaf_stats: tree has no non-root nodes");
  LeafStats out;
  for (const Node& n : tree.nodes()) {
    if (n.is_root() || !n.children.empty()) continue;
    out.per_leaf.push_back({n.id, n.depth, n.reward.value_or(0.0)});
    out.mean_leaf_reward += n.reward.value_or(0.0);
    out.mean_leaf_depth += static_cast<double>(n.depth);
  }
  if (out.per_leaf.empty()) throw std::logic_error("leaf_stats: no leaves found");
  out.mean_leaf_reward /= static_cast<double>(out.per_leaf.size());
  out.mean_leaf_depth /= static_cast<double>(out.per_leaf.size());
  return out;
}

}  // namespace lemcts::engine
