#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lemcts/generator.hpp"
#include "lemcts/reward.hpp"
#include "lemcts/types.hpp"

namespace lemcts::baselines {

/// Deterministic greedy decode of a single model.
inline Trajectory greedy(const Problem& problem, const GeneratorHandle& handle,
                         int depth_cap = 32, CallStats* stats = nullptr) {
  GenerationParams params;
  params.mode = GenMode::greedy;
  RngStream rng(0);  // greedy mode never draws
  return generate_solution(handle, problem, params, depth_cap, rng, stats);
}

namespace detail {

// Round-robin sampling of whole solutions across the pool; sample i comes
// from pool[i % L] with its own RNG substream, so results do not depend on
// scheduling or pool-internal state.
inline std::vector<Trajectory> sample_solutions(const Problem& problem,
                                                const GeneratorPool& pool,
                                                const BaselineConfig& cfg,
                                                CallStats* stats) {
  if (pool.empty()) throw std::invalid_argument("baselines: empty pool");
  RngStream base(mix_seed(cfg.seed, problem.id));
  std::vector<Trajectory> out;
  out.reserve(static_cast<size_t>(cfg.n_samples));
  for (int i = 0; i < cfg.n_samples; ++i) {
    RngStream rng = base.substream(static_cast<uint64_t>(i));
    const GeneratorHandle& handle = pool[static_cast<size_t>(i) % pool.size()];
    out.push_back(generate_solution(handle, problem, cfg.generation, cfg.depth_cap, rng, stats));
  }
  return out;
}

inline Trajectory argmax_by_score(const Problem& problem, std::vector<Trajectory> samples,
                                  const PrmHandle& prm, const BaselineConfig& cfg,
                                  CallStats* stats) {
  std::optional<size_t> best;
  double best_score = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].empty()) continue;
    double s = score_trajectory(prm, problem, samples[i], cfg.aggregator, stats);
    samples[i].score = s;
    if (!best || s > best_score) {  // earliest-sampled wins ties
      best = i;
      best_score = s;
    }
  }
  if (!best) throw std::runtime_error("baselines: all samples failed");
  return std::move(samples[*best]);
}

}  // namespace detail

struct ScResult {
  std::string answer;
  std::vector<std::pair<std::string, int>> votes;  // first-seen order
};

/// Sample N solutions and majority-vote on extracted answers; ties go to the
/// earliest-sampled answer.
inline ScResult self_consistency(const Problem& problem, const GeneratorHandle& handle,
                                 const BaselineConfig& cfg, CallStats* stats = nullptr) {
  cfg.validate();
  ScResult result;
  for (const Trajectory& t : detail::sample_solutions(problem, {handle}, cfg, stats)) {
    if (!t.answer) continue;
    auto it = std::find_if(result.votes.begin(), result.votes.end(),
                           [&](const auto& v) { return v.first == *t.answer; });
    if (it == result.votes.end())
      result.votes.emplace_back(*t.answer, 1);
    else
      ++it->second;
  }
  if (result.votes.empty())
    throw std::runtime_error("self_consistency: no extractable answers");
  int best = 0;
  for (const auto& [answer, count] : result.votes) best = std::max(best, count);
  for (const auto& [answer, count] : result.votes) {
    if (count == best) {
      result.answer = answer;
      break;
    }
  }
  return result;
}

/// N samples from one model, highest trajectory score wins.
inline Trajectory best_of_n(const Problem& problem, const GeneratorHandle& handle,
                            const PrmHandle& prm, const BaselineConfig& cfg,
                            CallStats* stats = nullptr) {
  cfg.validate();
  return detail::argmax_by_score(problem, detail::sample_solutions(problem, {handle}, cfg, stats),
                                 prm, cfg, stats);
}

/// N samples drawn round-robin across the pool, highest trajectory score wins.
inline Trajectory best_of_ensemble(const Problem& problem, const GeneratorPool& pool,
                                   const PrmHandle& prm, const BaselineConfig& cfg,
                                   CallStats* stats = nullptr) {
  cfg.validate();
  return detail::argmax_by_score(problem, detail::sample_solutions(problem, pool, cfg, stats),
                                 prm, cfg, stats);
}

namespace detail {

struct Beam {
  Trajectory traj;
  std::vector<double> rewards;
  uint64_t order = 0;  // creation order, for tie-breaking
};

/**
 * Reward-guided beam search over reasoning steps. Each round every live beam
 * proposes candidates (round-robin across the pool), every extension is
 * scored by the PRM, and the top `beam_width` extensions survive. Beams whose
 * step is final retire; the best retired trajectory under the aggregator
 * wins. If nothing retires within the depth cap the best truncated beam is
 * returned, flagged.
 */
inline Trajectory ensemble_beam_core(const Problem& problem, const GeneratorPool& pool,
                                     const PrmHandle& prm, const BaselineConfig& cfg,
                                     CallStats* stats) {
  cfg.validate();
  if (pool.empty()) throw std::invalid_argument("beam search: empty pool");
  RngStream base(mix_seed(cfg.seed, problem.id));

  std::vector<Beam> live(1);
  live[0].traj.problem_id = problem.id;
  std::vector<Beam> retired;
  uint64_t next_order = 1;

  for (int round = 0; round < cfg.depth_cap && !live.empty(); ++round) {
    struct Extension {
      size_t beam;
      Step step;
      double reward;
      uint64_t order;
    };
    std::vector<Extension> extensions;
    for (size_t b = 0; b < live.size(); ++b) {
      for (int slot = 0; slot < cfg.candidates_per_step; ++slot) {
        const GeneratorHandle& handle = pool[static_cast<size_t>(slot) % pool.size()];
        RngStream rng = base.substream(mix_seed(mix_seed(static_cast<uint64_t>(round),
                                                         static_cast<uint64_t>(b)),
                                                static_cast<uint64_t>(slot)));
        Step step = handle->generate_step(problem, live[b].traj, cfg.generation, rng);
        if (stats) ++stats->generator_calls;
        double reward = score_step(prm, problem, live[b].traj, step, stats);
        extensions.push_back({b, std::move(step), reward, next_order++});
      }
    }

    std::stable_sort(extensions.begin(), extensions.end(), [](const auto& a, const auto& b) {
      if (a.reward != b.reward) return a.reward > b.reward;
      return a.order < b.order;
    });

    // Top beam_width extensions are kept; final ones retire immediately.
    std::vector<Beam> survivors;
    int taken = 0;
    for (const Extension& ext : extensions) {
      if (taken >= cfg.beam_width) break;
      ++taken;
      Beam next;
      next.traj = live[ext.beam].traj;
      next.traj.steps.push_back(ext.step);
      next.rewards = live[ext.beam].rewards;
      next.rewards.push_back(ext.reward);
      next.order = ext.order;
      if (ext.step.final) {
        next.traj.score = aggregate(next.rewards, cfg.aggregator);
        next.traj.answer = extract_answer(next.traj.text());
        retired.push_back(std::move(next));
      } else {
        survivors.push_back(std::move(next));
      }
    }
    live = std::move(survivors);
  }

  if (!retired.empty()) {
    size_t best = 0;
    for (size_t i = 1; i < retired.size(); ++i) {
      double a = *retired[i].traj.score, b = *retired[best].traj.score;
      if (a > b || (a == b && retired[i].order < retired[best].order)) best = i;
    }
    return std::move(retired[best].traj);
  }

  // Nothing finished within the cap: best truncated beam, flagged.
  if (live.empty()) throw std::runtime_error("beam search: no live or retired beams");
  size_t best = 0;
  double best_score = aggregate(live[0].rewards, cfg.aggregator);
  for (size_t i = 1; i < live.size(); ++i) {
    double s = aggregate(live[i].rewards, cfg.aggregator);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  Trajectory out = std::move(live[best].traj);
  out.truncated = true;
  out.score = best_score;
  out.answer = extract_answer(out.text());
  return out;
}

}  // namespace detail

/// Single-model reward-guided beam search.
inline Trajectory beam_search(const Problem& problem, const GeneratorHandle& handle,
                              const PrmHandle& prm, const BaselineConfig& cfg,
                              CallStats* stats = nullptr) {
  return detail::ensemble_beam_core(problem, {handle}, prm, cfg, stats);
}

/// Beam search whose per-step candidates come round-robin from the pool.
inline Trajectory ensemble_beam_search(const Problem& problem, const GeneratorPool& pool,
                                       const PrmHandle& prm, const BaselineConfig& cfg,
                                       CallStats* stats = nullptr) {
  return detail::ensemble_beam_core(problem, pool, prm, cfg, stats);
}

}  // namespace lemcts::baselines
