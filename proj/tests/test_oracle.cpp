#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>
#include <vector>

#include "lemcts/baselines.hpp"
#include "lemcts/oracle.hpp"
#include "support/worlds.hpp"

using namespace lemcts;
using testworlds::World;

namespace {

// Independent recount of complete greedy combination chains, walking the
// world's continuation map directly.
long long recount_chains(const World& w, const std::string& prefix = "") {
  const auto& conts = w.continuations.at(prefix);
  std::set<std::pair<std::string, bool>> distinct(conts.begin(), conts.end());
  long long total = 0;
  for (const auto& [text, final] : distinct) {
    if (final)
      total += 1;
    else
      total += recount_chains(w, prefix + text);
  }
  return total;
}

}  // namespace

TEST_CASE("enumerate_space: single model gives the greedy chain") {
  World w = testworlds::make_random_world({.seed = 17, .num_models = 1, .max_depth = 3});
  auto space = oracle::enumerate_space(w.problem, w.pool, {8, 1000});
  REQUIRE(space.size() == 1);
  Trajectory greedy = baselines::greedy(w.problem, w.pool[0]);
  REQUIRE(space[0].size() == greedy.size());
  for (size_t i = 0; i < greedy.size(); ++i) CHECK(space[0].steps[i].text == greedy.steps[i].text);
}

TEST_CASE("enumerate_space: L=2 with distinct branches gives 4 chains") {
  // Hand-built world: depth-1 steps distinct per model, depth-2 always final.
  std::vector<ScriptTable> tables(2);
  for (int m = 0; m < 2; ++m)
    tables[(size_t)m].add("q1", "", {{"open " + std::to_string(m) + ".\n", false, 1.0}});
  for (int opener = 0; opener < 2; ++opener) {
    std::string prefix = "open " + std::to_string(opener) + ".\n";
    for (int m = 0; m < 2; ++m)
      tables[(size_t)m].add("q1", prefix,
                            {{"The answer is " + std::to_string(10 * opener + m), true, 1.0}});
  }
  GeneratorPool pool{make_scripted_generator("a", tables[0]),
                     make_scripted_generator("b", tables[1])};
  Problem p;
  p.id = "q1";
  p.question = "?";
  auto space = oracle::enumerate_space(p, pool, {8, 1000});
  CHECK(space.size() == 4);

  // Deterministic ordering: first chain follows model index 0 at every hop.
  CHECK(space[0].steps[0].text == "open 0.\n");
  CHECK(space[0].steps[1].text == "The answer is 0");

  // No duplicate chains.
  std::set<std::string> texts;
  for (const auto& t : space) CHECK(texts.insert(t.text()).second);
}

TEST_CASE("enumerate_space: counts match an independent recount") {
  for (uint64_t seed : {5ull, 6ull, 7ull, 8ull}) {
    World w = testworlds::make_random_world({.seed = seed, .max_depth = 4});
    auto space = oracle::enumerate_space(w.problem, w.pool, {8, 100000});
    CHECK(static_cast<long long>(space.size()) == recount_chains(w));
    for (const auto& t : space) CHECK(t.steps.back().final);
  }
}

TEST_CASE("enumerate_space: budget violations are hard errors") {
  World w = testworlds::make_random_world({.seed = 9, .max_depth = 4, .final_prob = 0.0});
  CHECK_THROWS_AS(oracle::enumerate_space(w.problem, w.pool, {8, 3}), oracle::BudgetExceeded);
  // Depth budget below the world's chain length: an open chain at max_depth.
  CHECK_THROWS_AS(oracle::enumerate_space(w.problem, w.pool, {2, 100000}),
                  oracle::BudgetExceeded);
}

TEST_CASE("enumerate_space: refuses non-scripted handles") {
  World w = testworlds::make_random_world({.seed = 10, .max_depth = 3});
  HttpBackendConfig hc;
  hc.http.endpoint = "http://127.0.0.1:1";  // never contacted
  GeneratorPool pool = w.pool;
  pool.push_back(make_http_generator("live", hc));
  CHECK_THROWS_AS(oracle::enumerate_space(w.problem, pool, {8, 1000}), std::invalid_argument);
}

TEST_CASE("oracle_best: exact argmax with enumeration-order ties") {
  Problem p;
  p.id = "q1";
  p.question = "?";
  auto mk = [&](const std::string& answer) {
    Trajectory t;
    t.problem_id = "q1";
    Step s;
    s.text = "The answer is " + answer;
    s.final = true;
    s.producer = "m";
    t.steps.push_back(std::move(s));
    return t;
  };
  std::vector<Trajectory> space{mk("1"), mk("2"), mk("3")};
  TablePrm scores;
  scores.add("q1", "", "The answer is 1", 0.2);
  scores.add("q1", "", "The answer is 2", 0.9);
  scores.add("q1", "", "The answer is 3", 0.9);
  auto prm = make_table_prm(std::move(scores));

  auto [best, score] = oracle::oracle_best(space, p, prm, Aggregator::last);
  CHECK(score == 0.9);
  CHECK(best.steps[0].text == "The answer is 2");  // first of the tied pair

  auto [only, s1] = oracle::oracle_best({mk("1")}, p, prm, Aggregator::last);
  CHECK(only.steps[0].text == "The answer is 1");
  CHECK(s1 == 0.2);
  CHECK_THROWS_AS(oracle::oracle_best({}, p, prm, Aggregator::last), std::invalid_argument);
}

TEST_CASE("oracle_best dominates every single-model greedy chain") {
  for (uint64_t seed : {31ull, 32ull, 33ull, 34ull, 35ull}) {
    World w = testworlds::make_random_world({.seed = seed, .max_depth = 4});
    auto prm = make_uniform_prm(seed * 13);
    auto space = oracle::enumerate_space(w.problem, w.pool, {8, 100000});
    auto [best, best_score] = oracle::oracle_best(space, w.problem, prm, Aggregator::last);
    (void)best;
    for (const auto& model : w.pool) {
      Trajectory chain = baselines::greedy(w.problem, model);
      double chain_score = score_trajectory(prm, w.problem, chain, Aggregator::last);
      CHECK(best_score >= chain_score - 1e-12);
    }
  }
}

TEST_CASE("space dump carries scores and answers") {
  World w = testworlds::make_random_world({.seed = 20, .max_depth = 3});
  auto prm = make_uniform_prm(1);
  auto space = oracle::enumerate_space(w.problem, w.pool, {8, 1000});
  auto doc = oracle::space_to_json(space, w.problem, prm, Aggregator::last);
  REQUIRE(doc["trajectories"].size() == space.size());
  CHECK(doc["problem_id"] == w.problem.id);
  for (const auto& t : doc["trajectories"]) {
    CHECK(t.contains("score"));
    CHECK(t["steps"].size() >= 1);
  }
}
