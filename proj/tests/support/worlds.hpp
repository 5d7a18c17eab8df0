#pragma once

// Deterministic scripted-world builders shared by the unit and acceptance
// suites. A world is a problem plus a fully tabulated pool: every reachable
// prefix has one scripted continuation per model, so searches, enumeration,
// and independent recounts all see the same space.

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lemcts/generator.hpp"
#include "lemcts/types.hpp"
#include "lemcts/util.hpp"

namespace testworlds {

struct World {
  lemcts::Problem problem;
  lemcts::GeneratorPool pool;
  // Per prefix text: the (text, final) continuation of each model, in pool
  // order. Kept for independent recounts in tests.
  std::map<std::string, std::vector<std::pair<std::string, bool>>> continuations;
  std::vector<std::string> gold;  // gold chain step texts, possibly empty
};

struct RandomWorldSpec {
  uint64_t seed = 1;
  int num_models = 3;
  int max_depth = 4;       // steps per chain; the last step is forced final
  double final_prob = 0.25;
  int vocab = 6;
};

// Step text for (prefix, model); a pure function of the spec seed.
inline std::pair<std::string, bool> random_continuation(const RandomWorldSpec& spec,
                                                        const std::string& prefix, int model,
                                                        int depth) {
  uint64_t h = lemcts::mix_seed(lemcts::mix_seed(spec.seed, prefix), "model" + std::to_string(model));
  int token = static_cast<int>(h % static_cast<uint64_t>(spec.vocab));
  bool final = depth + 1 >= spec.max_depth ||
               lemcts::hash_real01(spec.seed ^ 0x5eedf00d, prefix,
                                   "final" + std::to_string(model)) < spec.final_prob;
  if (final) return {"The answer is " + std::to_string(token), true};
  return {"take branch " + std::to_string(token) + ".\n", false};
}

/**
 * Random finite world: every chain ends in a final answer step no deeper than
 * max_depth. Distinct models may produce identical texts (dedup and duplicate
 * sibling handling get exercised).
 */
inline World make_random_world(const RandomWorldSpec& spec) {
  World w;
  w.problem.id = "world-" + lemcts::hex64(spec.seed);
  w.problem.question = "synthetic question " + lemcts::hex64(spec.seed);

  std::vector<lemcts::ScriptTable> tables(static_cast<size_t>(spec.num_models));

  // Depth-first over reachable prefixes.
  std::vector<std::pair<std::string, int>> stack{{"", 0}};
  while (!stack.empty()) {
    auto [prefix, depth] = stack.back();
    stack.pop_back();
    if (w.continuations.count(prefix)) continue;

    std::vector<std::pair<std::string, bool>> conts;
    for (int m = 0; m < spec.num_models; ++m) {
      auto [text, final] = random_continuation(spec, prefix, m, depth);
      tables[static_cast<size_t>(m)].add(w.problem.id, prefix,
                                         {{text, final, 1.0}});
      conts.emplace_back(text, final);
      if (!final) stack.emplace_back(prefix + text, depth + 1);  // text ends with '\n'
    }
    w.continuations[prefix] = std::move(conts);
  }

  for (int m = 0; m < spec.num_models; ++m)
    w.pool.push_back(lemcts::make_scripted_generator("model" + std::to_string(m),
                                                     std::move(tables[static_cast<size_t>(m)])));
  return w;
}

/// Engine-reachable node count (duplicate sibling texts counted separately),
/// by independent recursion over the scripted continuations.
inline long long engine_tree_size(const World& w, const std::string& prefix = "",
                                  std::map<std::string, long long>* memo = nullptr) {
  std::map<std::string, long long> local;
  if (!memo) memo = &local;
  auto it = memo->find(prefix);
  if (it != memo->end()) return it->second;
  long long count = 1;
  const auto& conts = w.continuations.at(prefix);
  for (const auto& [text, final] : conts) {
    if (final)
      count += 1;
    else
      count += engine_tree_size(w, prefix + text, memo);
  }
  (*memo)[prefix] = count;
  return count;
}

/**
 * Gold-chain world: one high-reward chain of `gold_depth` steps (the last
 * carries the answer); at gold prefix k only model (k mod L) continues the
 * chain, the others start decoy branches that end in a wrong answer.
 */
inline World make_gold_world(uint64_t seed, int gold_depth, int num_models = 3,
                             const std::string& answer = "7") {
  World w;
  w.problem.id = "gold-" + lemcts::hex64(seed);
  w.problem.question = "gold question " + lemcts::hex64(seed);
  w.problem.gold_answer = answer;

  std::vector<lemcts::ScriptTable> tables(static_cast<size_t>(num_models));
  std::string prefix;
  for (int k = 0; k < gold_depth; ++k) {
    bool last = k + 1 == gold_depth;
    std::string gold_text = last ? "The answer is " + answer
                                 : "derive fact " + std::to_string(k) + ".\n";
    w.gold.push_back(gold_text);
    std::string decoy = "guess wildly at level " + std::to_string(k) + ".\n";
    std::string wrong = "The answer is " + std::to_string(100 + k);

    std::vector<std::pair<std::string, bool>> conts;
    for (int m = 0; m < num_models; ++m) {
      if (m == k % num_models) {
        tables[static_cast<size_t>(m)].add(w.problem.id, prefix, {{gold_text, last, 1.0}});
        conts.emplace_back(gold_text, last);
      } else {
        tables[static_cast<size_t>(m)].add(w.problem.id, prefix, {{decoy, false, 1.0}});
        conts.emplace_back(decoy, false);
      }
    }
    w.continuations[prefix] = conts;

    // Decoy branches die out after one wrong-answer step.
    std::string decoy_prefix = prefix + decoy;
    if (!w.continuations.count(decoy_prefix)) {
      std::vector<std::pair<std::string, bool>> dconts;
      for (int m = 0; m < num_models; ++m) {
        tables[static_cast<size_t>(m)].add(w.problem.id, decoy_prefix, {{wrong, true, 1.0}});
        dconts.emplace_back(wrong, true);
      }
      w.continuations[decoy_prefix] = std::move(dconts);
    }
    prefix += gold_text;  // non-final gold text already ends with '\n'
  }

  for (int m = 0; m < num_models; ++m)
    w.pool.push_back(lemcts::make_scripted_generator("model" + std::to_string(m),
                                                     std::move(tables[static_cast<size_t>(m)])));
  return w;
}

}  // namespace testworlds
