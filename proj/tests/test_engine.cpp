#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lemcts/engine.hpp"
#include "lemcts/oracle.hpp"
#include "support/worlds.hpp"

using namespace lemcts;
using namespace lemcts::engine;
using testworlds::World;

namespace {

Step make_step(const std::string& text, bool final = false, const std::string& producer = "m") {
  Step s;
  s.text = final ? text : text + "\n";
  s.producer = producer;
  s.final = final;
  return s;
}

SearchConfig base_config() {
  SearchConfig cfg;
  cfg.seed = 5;
  return cfg;
}

// A generator that fails a fixed number of times before delegating.
class FlakyGenerator final : public Generator {
public:
  FlakyGenerator(GeneratorHandle inner, int failures)
      : inner_(std::move(inner)), failures_left_(failures) {}
  const std::string& model_id() const override { return inner_->model_id(); }
  GeneratorKind kind() const override { return inner_->kind(); }
  Step generate_step(const Problem& p, const Trajectory& t, const GenerationParams& g,
                     RngStream& r) override {
    if (failures_left_ > 0) {
      --failures_left_;
      throw TransportError("injected fault");
    }
    return inner_->generate_step(p, t, g, r);
  }

private:
  GeneratorHandle inner_;
  int failures_left_;
};

void check_visit_identity(const SearchTree& tree) {
  for (const Node& n : tree.nodes()) REQUIRE(n.visits == subtree_size(tree, n.id));
}

}  // namespace

TEST_CASE("uct_score: closed-form values") {
  CHECK(uct_score(0.5, 3, 17, 0.0) == 0.5);
  CHECK(uct_score(0.5, 1, 1, 2.0) == 0.5);  // ln 1 = 0
  double expected = 0.5 + std::sqrt(std::log(8.0) / 2.0);
  CHECK(uct_score(0.5, 2, 8, 1.0) == Catch::Approx(expected).margin(1e-12));
  CHECK(uct_score(0.5, 2, 8, 1.0) == Catch::Approx(1.5197).margin(1e-4));
  CHECK_THROWS_AS(uct_score(0.5, 0, 1, 1.0), std::invalid_argument);
}

TEST_CASE("select frontier: a root that can still take children is returned") {
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  create_node(tree, root, make_step("a"), 0.9);
  SearchConfig cfg = base_config();
  auto got = select(tree, cfg, /*n_child=*/3);
  REQUIRE(got.has_value());
  CHECK(*got == root);
}

TEST_CASE("select frontier: descends to the best-UCT child") {
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  NodeId hi = create_node(tree, root, make_step("hi"), 0.9);
  create_node(tree, root, make_step("lo"), 0.2);
  tree.node(root).visits = 3;  // consistent with two children
  SearchConfig cfg = base_config();
  cfg.C = 0.5;
  auto got = select(tree, cfg, /*n_child=*/2);  // root is count-full
  REQUIRE(got.has_value());
  CHECK(*got == hi);
}

TEST_CASE("select frontier: all children terminal means exhaustion") {
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  create_node(tree, root, make_step("The answer is 1", true), 0.9);
  create_node(tree, root, make_step("The answer is 2", true), 0.2);
  tree.node(root).visits = 3;
  SearchConfig cfg = base_config();
  CHECK_FALSE(select(tree, cfg, /*n_child=*/2).has_value());
  CHECK(tree.node(root).dead);
}

TEST_CASE("select literal: stops at childless nodes, dead-ends restart") {
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  SearchConfig cfg = base_config();
  cfg.selection_rule = SelectionRule::literal;

  auto got = select(tree, cfg, 3);
  REQUIRE(got.has_value());
  CHECK(*got == root);  // childless root is the leaf

  NodeId a = create_node(tree, root, make_step("a"), 0.5);
  tree.node(root).visits = 2;
  got = select(tree, cfg, 3);
  REQUIRE(got.has_value());
  CHECK(*got == a);  // walk moves into the expandable child

  // Once the only child is terminal, the root is a literal dead end even
  // though its child count is below the cap.
  SearchTree t2;
  NodeId r2 = create_node(t2, std::nullopt, std::nullopt);
  create_node(t2, r2, make_step("The answer is 9", true), 0.8);
  t2.node(r2).visits = 2;
  CHECK_FALSE(select(t2, cfg, 3).has_value());
  CHECK(t2.node(r2).dead);
}

TEST_CASE("pick_model: without replacement, then the cycle restarts") {
  World w = testworlds::make_random_world({.seed = 3, .max_depth = 3});
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  create_node(tree, root, make_step("x", false, "model0"), 0.5);
  create_node(tree, root, make_step("y", false, "model1"), 0.5);

  RngStream rng(9);
  for (int i = 0; i < 20; ++i)
    CHECK(pick_model(tree, root, w.pool, rng)->model_id() == "model2");

  // Fresh node: the pick is seeded and reproducible.
  RngStream r1(4), r2(4);
  SearchTree fresh;
  NodeId froot = create_node(fresh, std::nullopt, std::nullopt);
  CHECK(pick_model(fresh, froot, w.pool, r1)->model_id() ==
        pick_model(fresh, froot, w.pool, r2)->model_id());

  // All three used: the exclusion resets and every model is drawn again.
  create_node(tree, root, make_step("z", false, "model2"), 0.5);
  std::map<std::string, int> counts;
  RngStream rng2(11);
  for (int i = 0; i < 3000; ++i) ++counts[pick_model(tree, root, w.pool, rng2)->model_id()];
  REQUIRE(counts.size() == 3);
  for (const auto& [id, count] : counts) {
    (void)id;
    CHECK(count > 3000 / 3 - 150);
    CHECK(count < 3000 / 3 + 150);
  }
}

TEST_CASE("backpropagate: standard running average") {
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  NodeId a = create_node(tree, root, make_step("a"), 0.8);
  NodeId leaf = create_node(tree, a, make_step("b"), 0.4);
  backpropagate(tree, leaf, 0.4, Backprop::standard);
  CHECK(tree.node(a).visits == 2);
  CHECK(tree.node(a).value == Catch::Approx((0.8 + 0.4) / 2.0).margin(1e-15));
  CHECK(tree.node(root).visits == 2);
  // The new leaf itself is untouched.
  CHECK(tree.node(leaf).visits == 1);
  CHECK(tree.node(leaf).value == 0.4);
}

TEST_CASE("backpropagate: optimistic uses the best child value") {
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  NodeId a = create_node(tree, root, make_step("a"), 0.5);
  create_node(tree, a, make_step("good"), 0.9);
  NodeId leaf = create_node(tree, a, make_step("bad"), 0.2);
  // Rebuild consistent visit counts for the pre-existing child.
  tree.node(a).visits = 2;
  tree.node(root).visits = 3;

  backpropagate(tree, leaf, 0.2, Backprop::optimistic);
  CHECK(tree.node(a).visits == 3);
  CHECK(tree.node(a).value == Catch::Approx((2 * 0.5 + 0.9) / 3.0).margin(1e-15));
}

TEST_CASE("optimistic updates converge to a frozen max-child value") {
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  NodeId a = create_node(tree, root, make_step("a"), 0.1);
  NodeId c = create_node(tree, a, make_step("c"), 0.75);
  double v0 = tree.node(a).value;
  double m = 0.75;
  for (int k = 1; k <= 40; ++k) {
    backpropagate(tree, c, 0.75, Backprop::optimistic);
    int visits = tree.node(a).visits;
    CHECK(std::fabs(tree.node(a).value - m) <=
          std::fabs(v0 - m) / static_cast<double>(visits) + 1e-12);
  }
}

TEST_CASE("run_search: one iteration grows the tree to two nodes") {
  World w = testworlds::make_gold_world(21, 3);
  SearchConfig cfg = base_config();
  cfg.n_iter = 1;
  SearchResult res = run_search(w.problem, w.pool, make_uniform_prm(3), cfg);
  CHECK(res.tree.size() == 2);
  CHECK(res.tree.node(0).visits == 2);
  CHECK(res.iterations_run == 1);
  check_visit_identity(res.tree);
}

TEST_CASE("expand: duplicate step text makes distinct siblings") {
  ScriptTable ta, tb;
  ta.add("q1", "", {{"same\n", false, 1.0}});
  tb.add("q1", "", {{"same\n", false, 1.0}});
  GeneratorPool pool{make_scripted_generator("a", ta), make_scripted_generator("b", tb)};
  Problem p;
  p.id = "q1";
  p.question = "?";

  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  SearchConfig cfg = base_config();
  RngStream rng(1);
  NodeId c1 = expand(tree, root, pool, make_uniform_prm(1), p, cfg, rng);
  backpropagate(tree, c1, *tree.node(c1).reward, cfg.backprop);
  NodeId c2 = expand(tree, root, pool, make_uniform_prm(1), p, cfg, rng);
  backpropagate(tree, c2, *tree.node(c2).reward, cfg.backprop);
  CHECK(c1 != c2);
  CHECK(tree.node(c1).step->text == tree.node(c2).step->text);
  CHECK(tree.node(c1).step->producer != tree.node(c2).step->producer);
  CHECK(tree.node(root).children.size() == 2);
}

TEST_CASE("expand: depth cap turns a non-final step into a truncated terminal") {
  ScriptTable loop;
  std::string prefix;
  for (int i = 0; i < 4; ++i) {
    loop.add("q1", prefix, {{"go\n", false, 1.0}});
    prefix += "go\n";
  }
  GeneratorPool pool{make_scripted_generator("a", loop)};
  Problem p;
  p.id = "q1";
  p.question = "?";
  SearchConfig cfg = base_config();
  cfg.depth_cap = 2;
  cfg.n_iter = 10;
  SearchResult res = run_search(p, pool, make_uniform_prm(1), cfg);
  bool found_truncated = false;
  for (const Node& n : res.tree.nodes()) {
    if (n.truncated) {
      found_truncated = true;
      CHECK(n.terminal);
      CHECK(n.depth == 2);
      CHECK_FALSE(n.step->final);
    }
    if (n.terminal) CHECK(n.children.empty());
  }
  CHECK(found_truncated);
  REQUIRE(res.best.has_value());
  CHECK(res.best->truncated);  // only truncated trajectories exist
}

TEST_CASE("run_search: gold chain world is solved with score 1.0") {
  World w = testworlds::make_gold_world(77, 4);
  GoldChainPrm prm(42);
  prm.set_chain(w.problem.id, w.gold);
  SearchConfig cfg = base_config();
  SearchResult res = run_search(w.problem, w.pool, make_gold_chain_prm(std::move(prm)), cfg);
  REQUIRE(res.best.has_value());
  CHECK(res.best->score == 1.0);
  REQUIRE(res.best->size() == w.gold.size());
  for (size_t i = 0; i < w.gold.size(); ++i) CHECK(res.best->steps[i].text == w.gold[i]);
  CHECK(res.best->answer == std::string("7"));
  check_visit_identity(res.tree);
}

TEST_CASE("run_search: exhaustive budget matches the brute-force optimum") {
  for (uint64_t seed : {101ull, 202ull, 303ull}) {
    World w = testworlds::make_random_world({.seed = seed, .max_depth = 4});
    auto prm = make_uniform_prm(seed ^ 0xabc);
    long long full = testworlds::engine_tree_size(w);

    SearchConfig cfg = base_config();
    cfg.epsilon = 0.0;  // depth preference off: every child slot gets filled
    cfg.n_iter = static_cast<int>(full) + 4;
    cfg.n_child = 3;
    SearchResult res = run_search(w.problem, w.pool, prm, cfg);
    CHECK(res.stop_reason == StopReason::exhausted);
    CHECK(static_cast<long long>(res.tree.size()) == full);

    auto space = oracle::enumerate_space(w.problem, w.pool, {8, 100000});
    auto [best, best_score] = oracle::oracle_best(space, w.problem, prm, cfg.aggregator);
    (void)best;
    REQUIRE(res.best.has_value());
    CHECK(std::fabs(*res.best->score - best_score) < 1e-9);
  }
}

TEST_CASE("run_search: per-iteration invariants on a fuzzed batch") {
  RngStream meta(909);
  for (int round = 0; round < 10; ++round) {
    World w = testworlds::make_random_world(
        {.seed = meta.next_u64(), .max_depth = 5, .final_prob = 0.3});
    SearchConfig cfg = base_config();
    cfg.seed = meta.next_u64();
    cfg.n_iter = 40;
    cfg.C = round % 2 == 0 ? 0.5 : 1.414;
    cfg.backprop = round % 2 == 0 ? Backprop::standard : Backprop::optimistic;
    cfg.selection_rule = round % 3 == 0 ? SelectionRule::literal : SelectionRule::frontier;
    cfg.n_child = 2 + static_cast<int>(meta.next_index(2));
    int n_child = *cfg.n_child;

    SearchHooks hooks;
    hooks.before_expansion = [&](const SearchTree& tree, NodeId id) {
      REQUIRE_FALSE(is_fully_expanded(tree, id, n_child, cfg.epsilon));
      REQUIRE_FALSE(tree.node(id).terminal);
      REQUIRE_FALSE(tree.node(id).dead);
    };
    hooks.after_iteration = [&](const SearchTree& tree, int) {
      check_visit_identity(tree);
      for (const Node& n : tree.nodes()) {
        REQUIRE(static_cast<int>(n.children.size()) <= n_child);
        if (n.terminal) REQUIRE(n.children.empty());
        REQUIRE(n.value >= 0.0);
        REQUIRE(n.value <= 1.0);
      }
    };
    run_search(w.problem, w.pool, make_uniform_prm(meta.next_u64()), cfg, hooks);
  }
}

TEST_CASE("run_search: seeded determinism gives identical dumps") {
  World w = testworlds::make_random_world({.seed = 55, .max_depth = 5, .final_prob = 0.3});
  SearchConfig cfg = base_config();
  cfg.n_iter = 60;
  auto prm = make_uniform_prm(8);
  std::string d1 = dump_tree(run_search(w.problem, w.pool, prm, cfg).tree);
  std::string d2 = dump_tree(run_search(w.problem, w.pool, prm, cfg).tree);
  CHECK(d1 == d2);

  cfg.seed += 1;
  std::string d3 = dump_tree(run_search(w.problem, w.pool, prm, cfg).tree);
  CHECK(d1 != d3);
}

TEST_CASE("run_search: transient faults are retried, hard faults kill the node") {
  World w = testworlds::make_gold_world(31, 2);
  auto prm = make_uniform_prm(2);
  SearchConfig cfg = base_config();
  cfg.n_iter = 30;

  // One model faults twice; every expansion still lands inside the 3-attempt
  // retry budget because the faulty model recovers after its failures.
  GeneratorPool flaky_pool = w.pool;
  flaky_pool[0] = std::make_shared<FlakyGenerator>(w.pool[0], 2);
  SearchResult ok = run_search(w.problem, flaky_pool, prm, cfg);
  CHECK(ok.best.has_value());

  // A model that always fails marks its targets dead; the search finishes
  // anyway (the iteration is consumed, nothing crashes).
  GeneratorPool broken_pool;
  for (const auto& m : w.pool) broken_pool.push_back(std::make_shared<FlakyGenerator>(m, 1 << 20));
  SearchResult dead = run_search(w.problem, broken_pool, prm, cfg);
  CHECK_FALSE(dead.best.has_value());
  CHECK(dead.tree.node(dead.tree.root()).dead);
  CHECK(dead.stop_reason == StopReason::exhausted);
}

TEST_CASE("leaf_stats: arithmetic and dump round trip") {
  SearchTree tree;
  NodeId root = create_node(tree, std::nullopt, std::nullopt);
  NodeId a = create_node(tree, root, make_step("a"), 0.2);
  NodeId b = create_node(tree, a, make_step("b"), 0.55);
  create_node(tree, b, make_step("c"), 0.3);
  create_node(tree, root, make_step("d"), 0.8);

  // Leaves: the depth-3 chain end (reward 0.3) and the depth-1 node (0.8).
  LeafStats stats = leaf_stats(tree);
  REQUIRE(stats.per_leaf.size() == 2);
  CHECK(stats.mean_leaf_depth == Catch::Approx((3 + 1) / 2.0));
  CHECK(stats.mean_leaf_reward == Catch::Approx((0.3 + 0.8) / 2.0));

  SearchTree reloaded = tree_from_json(nlohmann::json::parse(dump_tree(tree)));
  LeafStats again = leaf_stats(reloaded);
  CHECK(again.mean_leaf_depth == stats.mean_leaf_depth);
  CHECK(again.mean_leaf_reward == stats.mean_leaf_reward);
  REQUIRE(again.per_leaf.size() == stats.per_leaf.size());
  for (size_t i = 0; i < stats.per_leaf.size(); ++i) {
    CHECK(again.per_leaf[i].id == stats.per_leaf[i].id);
    CHECK(again.per_leaf[i].depth == stats.per_leaf[i].depth);
    CHECK(again.per_leaf[i].reward == stats.per_leaf[i].reward);
  }

  SearchTree empty;
  create_node(empty, std::nullopt, std::nullopt);
  CHECK_THROWS_AS(leaf_stats(empty), std::invalid_argument);
}

TEST_CASE("run_search: truncated trajectories rank only as a fallback") {
  // One model loops forever, another answers immediately; both clean and
  // truncated leaves exist and the clean one wins.
  ScriptTable looper, answerer;
  std::string prefix;
  for (int i = 0; i < 8; ++i) {
    looper.add("q1", prefix, {{"loop step " + std::to_string(i) + "\n", false, 1.0}});
    answerer.add("q1", prefix, {{"The answer is 1", true, 1.0}});
    prefix += "loop step " + std::to_string(i) + "\n";
  }
  GeneratorPool pool{make_scripted_generator("loop", looper),
                     make_scripted_generator("ans", answerer)};
  Problem p;
  p.id = "q1";
  p.question = "?";
  SearchConfig cfg = base_config();
  cfg.depth_cap = 4;
  cfg.n_iter = 80;
  cfg.epsilon = 0.0;
  SearchResult res = run_search(p, pool, make_uniform_prm(6), cfg);
  REQUIRE(res.best.has_value());
  CHECK_FALSE(res.best->truncated);
  CHECK(res.best->steps.back().final);
  for (const auto& [t, score] : res.all_terminal) {
    (void)score;
    CHECK_FALSE(t.truncated);  // truncated ones excluded when clean ones exist
  }
}
