#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lemcts/http_client.hpp"
#include "lemcts/types.hpp"
#include "lemcts/util.hpp"

namespace lemcts {

enum class PrmKind { http, synthetic };

/**
 * Process reward model: scores one step in the context of the question and
 * the steps so far. Implementations must be deterministic in their inputs;
 * the raw score may stray outside [0,1] (HTTP backends), callers clamp.
 */
class ProcessRewardModel {
public:
  virtual ~ProcessRewardModel() = default;
  virtual PrmKind kind() const = 0;
  virtual double raw_score(const Problem& problem, const Trajectory& prefix,
                           const Step& step) = 0;
};

using PrmHandle = std::shared_ptr<ProcessRewardModel>;

/// Clamped step score in [0,1]. Out-of-range backend scores are clamped with
/// a warning rather than failing the search.
inline double score_step(const PrmHandle& prm, const Problem& problem, const Trajectory& prefix,
                         const Step& step, CallStats* stats = nullptr) {
  double raw = prm->raw_score(problem, prefix, step);
  if (stats) ++stats->prm_calls;
  if (raw < 0.0 || raw > 1.0) {
    std::fprintf(stderr, "[lemcts] warning: reward %.6f outside [0,1], clamping (problem %s)\n",
                 raw, problem.id.c_str());
    raw = std::clamp(raw, 0.0, 1.0);
  }
  return raw;
}

// ============================================================================
// Aggregation
// ============================================================================

/// Collapse per-step rewards to one trajectory score.
inline double aggregate(const std::vector<double>& rewards, Aggregator agg) {
  if (rewards.empty()) throw std::invalid_argument("aggregate: empty reward sequence");
  switch (agg) {
    case Aggregator::last:
      return rewards.back();
    case Aggregator::min:
      return *std::min_element(rewards.begin(), rewards.end());
    case Aggregator::mean: {
      double s = 0.0;
      for (double r : rewards) s += r;
      return s / static_cast<double>(rewards.size());
    }
    case Aggregator::product: {
      double p = 1.0;
      for (double r : rewards) p *= r;
      return p;
    }
  }
  throw std::logic_error("aggregate: unknown aggregator");
}

/// Score every step of the trajectory with the PRM and aggregate.
inline double score_trajectory(const PrmHandle& prm, const Problem& problem,
                               const Trajectory& traj, Aggregator agg,
                               CallStats* stats = nullptr) {
  if (traj.empty()) throw std::invalid_argument("score_trajectory: empty trajectory");
  std::vector<double> rewards;
  rewards.reserve(traj.size());
  Trajectory prefix;
  prefix.problem_id = traj.problem_id;
  for (const Step& s : traj.steps) {
    rewards.push_back(score_step(prm, problem, prefix, s, stats));
    prefix.steps.push_back(s);
  }
  return aggregate(rewards, agg);
}

// ============================================================================
// Synthetic reward models
// ============================================================================

/// Fixed lookup table keyed by (problem, prefix, step text). Misses are test
/// configuration errors.
class TablePrm final : public ProcessRewardModel {
public:
  void add(const std::string& problem_id, const std::string& prefix_text,
           const std::string& step_text, double score) {
    table_[key_of(problem_id, prefix_text, step_text)] = score;
  }

  PrmKind kind() const override { return PrmKind::synthetic; }

  double raw_score(const Problem& problem, const Trajectory& prefix, const Step& step) override {
    auto it = table_.find(key_of(problem.id, prefix.text(), step.text));
    if (it == table_.end())
      throw std::runtime_error("reward table miss: problem '" + problem.id + "' step '" +
                               step.text + "'");
    return it->second;
  }

  // {"problems": {<id>: [{"prefix"|"prefix_hash", "step", "score"}]}}
  static TablePrm from_json(const nlohmann::json& doc) {
    TablePrm prm;
    for (const auto& [pid, rows] : doc.at("problems").items()) {
      for (const auto& row : rows) {
        std::string hash = row.contains("prefix")
                               ? hex64(fnv1a64(row["prefix"].get<std::string>()))
                               : row.at("prefix_hash").get<std::string>();
        prm.table_[pid + "#" + hash + "#" + row.at("step").get<std::string>()] =
            row.at("score").get<double>();
      }
    }
    return prm;
  }

  static TablePrm load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reward table: " + path);
    return from_json(nlohmann::json::parse(in));
  }

private:
  static std::string key_of(const std::string& pid, const std::string& prefix_text,
                            const std::string& step_text) {
    return pid + "#" + hex64(fnv1a64(prefix_text)) + "#" + step_text;
  }

  std::map<std::string, double> table_;
};

/**
 * Rule PRM: a step on the designated gold chain (right step at the right
 * position after an all-gold prefix) scores 1; anything else draws uniformly
 * from [0, off_chain_max] keyed purely by (seed, problem, prefix, step) so
 * repeated queries agree.
 */
class GoldChainPrm final : public ProcessRewardModel {
public:
  explicit GoldChainPrm(uint64_t seed, double off_chain_max = 0.4)
      : seed_(seed), off_chain_max_(off_chain_max) {}

  void set_chain(const std::string& problem_id, std::vector<std::string> step_texts) {
    chains_[problem_id] = std::move(step_texts);
  }

  PrmKind kind() const override { return PrmKind::synthetic; }

  double raw_score(const Problem& problem, const Trajectory& prefix, const Step& step) override {
    auto it = chains_.find(problem.id);
    if (it != chains_.end() && on_chain(it->second, prefix, step)) return 1.0;
    return off_chain_max_ * hash_real01(seed_, problem.id, prefix.text(), step.text);
  }

  // {"problems": {<id>: ["step one\n", ...]}, "off_chain_max": 0.4}
  static GoldChainPrm from_json(const nlohmann::json& doc, uint64_t seed) {
    GoldChainPrm prm(seed, doc.value("off_chain_max", 0.4));
    if (doc.contains("problems")) {
      for (const auto& [pid, steps] : doc["problems"].items())
        prm.chains_[pid] = steps.get<std::vector<std::string>>();
    }
    return prm;
  }

  static GoldChainPrm load(const std::string& path, uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open gold chain file: " + path);
    return from_json(nlohmann::json::parse(in), seed);
  }

private:
  static bool on_chain(const std::vector<std::string>& gold, const Trajectory& prefix,
                       const Step& step) {
    size_t k = prefix.size();
    if (k >= gold.size() || step.text != gold[k]) return false;
    for (size_t i = 0; i < k; ++i)
      if (prefix.steps[i].text != gold[i]) return false;
    return true;
  }

  uint64_t seed_;
  double off_chain_max_;
  std::map<std::string, std::vector<std::string>> chains_;
};

/// Uniform rule PRM: every (problem, prefix, step) gets an independent
/// hash-derived score in [lo, hi].
class UniformHashPrm final : public ProcessRewardModel {
public:
  explicit UniformHashPrm(uint64_t seed, double lo = 0.0, double hi = 1.0)
      : seed_(seed), lo_(lo), hi_(hi) {}

  PrmKind kind() const override { return PrmKind::synthetic; }

  double raw_score(const Problem& problem, const Trajectory& prefix, const Step& step) override {
    return lo_ + (hi_ - lo_) * hash_real01(seed_, problem.id, prefix.text(), step.text);
  }

private:
  uint64_t seed_;
  double lo_, hi_;
};

/**
 * Correlated-landscape rule PRM: the score of a trajectory point follows a
 * bounded random walk along the path, so good prefixes tend to have good
 * continuations. Useful for exercising exploration/exploitation behavior.
 */
class RandomWalkPrm final : public ProcessRewardModel {
public:
  explicit RandomWalkPrm(uint64_t seed, double drift = 0.25) : seed_(seed), drift_(drift) {}

  PrmKind kind() const override { return PrmKind::synthetic; }

  double raw_score(const Problem& problem, const Trajectory& prefix, const Step& step) override {
    double q = 0.5;
    std::string path;
    auto advance = [&](const std::string& step_text) {
      double shift = drift_ * (2.0 * hash_real01(seed_, problem.id, path, step_text) - 1.0);
      q = std::clamp(q + shift, 0.0, 1.0);
      path += step_text;
    };
    for (const Step& s : prefix.steps) advance(s.text);
    advance(step.text);
    return q;
  }

private:
  uint64_t seed_;
  double drift_;
};

// ============================================================================
// HTTP reward backend
// ============================================================================

/// POST {question, steps, index_to_score} -> {score}.
class HttpPrm final : public ProcessRewardModel {
public:
  explicit HttpPrm(HttpConfig cfg, std::string path = "/score")
      : client_(std::move(cfg)), path_(std::move(path)) {}

  PrmKind kind() const override { return PrmKind::http; }

  double raw_score(const Problem& problem, const Trajectory& prefix, const Step& step) override {
    nlohmann::json req;
    req["question"] = problem.question;
    auto& steps = req["steps"] = nlohmann::json::array();
    for (const Step& s : prefix.steps) steps.push_back(s.text);
    steps.push_back(step.text);
    req["index_to_score"] = steps.size() - 1;

    nlohmann::json res = client_.post(path_, req);
    if (!res.contains("score") || !res["score"].is_number())
      throw TransportError("scorer response missing numeric score");
    return res["score"].get<double>();
  }

private:
  HttpJsonClient client_;
  std::string path_;
};

inline PrmHandle make_table_prm(TablePrm prm) { return std::make_shared<TablePrm>(std::move(prm)); }
inline PrmHandle make_gold_chain_prm(GoldChainPrm prm) {
  return std::make_shared<GoldChainPrm>(std::move(prm));
}
inline PrmHandle make_uniform_prm(uint64_t seed, double lo = 0.0, double hi = 1.0) {
  return std::make_shared<UniformHashPrm>(seed, lo, hi);
}
inline PrmHandle make_random_walk_prm(uint64_t seed, double drift = 0.25) {
  return std::make_shared<RandomWalkPrm>(seed, drift);
}
inline PrmHandle make_http_prm(HttpConfig cfg, std::string path = "/score") {
  return std::make_shared<HttpPrm>(std::move(cfg), std::move(path));
}

}  // namespace lemcts
