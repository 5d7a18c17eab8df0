// Regenerates the bundled synthetic fixtures under data/: a 10-problem
// dataset, per-model script tables, gold chains for the rule PRM, configs,
// and the default prompt template. Run from the repository root:
//
//   ./build/tools/gen_fixtures [data]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lemcts/util.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct ModelScript {
  // problem id -> rows ({prefix, prefix_hash, steps}) in insertion order
  std::map<std::string, ordered_json> by_problem;

  void add(const std::string& pid, const std::string& prefix, const std::string& text,
           bool final) {
    ordered_json row;
    row["prefix"] = prefix;
    row["prefix_hash"] = lemcts::hex64(lemcts::fnv1a64(prefix));
    row["steps"] = ordered_json::array({ordered_json{{"text", text}, {"final", final}}});
    if (!by_problem.count(pid)) by_problem[pid] = ordered_json::array();
    by_problem[pid].push_back(std::move(row));
  }

  ordered_json to_json() const {
    ordered_json doc;
    auto& problems = doc["problems"] = ordered_json::object();
    for (const auto& [pid, rows] : by_problem) problems[pid] = rows;
    return doc;
  }
};

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

ordered_json base_config() {
  ordered_json cfg;
  cfg["search"] = ordered_json{{"n_iter", 200},
                               {"C", 1.414},
                               {"epsilon", 0.05},
                               {"backprop", "optimistic"},
                               {"aggregator", "last"},
                               {"seed", 42},
                               {"depth_cap", 32},
                               {"generation", ordered_json{{"mode", "greedy"}}}};
  cfg["baseline"] = ordered_json{
      {"n_samples", 9},
      {"beam_width", 1},
      {"candidates_per_step", 9},
      {"seed", 42},
      {"generation",
       ordered_json{{"mode", "nucleus"}, {"temperature", 0.5}, {"top_p", 0.95}}}};
  cfg["pool"] = ordered_json::array(
      {ordered_json{{"model_id", "alpha"}, {"kind", "scripted"},
                    {"script", "../synthetic/model_alpha.json"}},
       ordered_json{{"model_id", "beta"}, {"kind", "scripted"},
                    {"script", "../synthetic/model_beta.json"}},
       ordered_json{{"model_id", "gamma"}, {"kind", "scripted"},
                    {"script", "../synthetic/model_gamma.json"}}});
  cfg["prm"] = ordered_json{
      {"kind", "gold_chain"}, {"path", "../synthetic/gold_chains.json"}, {"seed", 7}};
  cfg["dataset"] = ordered_json{{"path", "../synthetic/problems.jsonl"}, {"name", "synthetic10"}};
  cfg["prompt_template"] = "../prompts/default.txt";
  cfg["output_dir"] = "out";
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path root = argc > 1 ? argv[1] : "data";
  const std::vector<std::string> model_ids{"alpha", "beta", "gamma"};
  const int L = static_cast<int>(model_ids.size());

  // Gold-chain lengths per problem (last step states the answer). The two
  // trailing problems have no gold chain: every scripted path ends in a
  // wrong answer.
  const std::vector<int> gold_depths{1, 2, 3, 4, 5, 6, 9, 12};
  const std::vector<std::string> answers{"14", "23", "36",  "41",  "58",
                                         "67", "79", "112", "555", "556"};

  std::map<std::string, ModelScript> scripts;
  ordered_json gold_doc;
  gold_doc["off_chain_max"] = 0.4;
  auto& gold_problems = gold_doc["problems"] = ordered_json::object();
  std::string dataset_jsonl;

  for (size_t p = 0; p < answers.size(); ++p) {
    std::string pid = "p" + std::string(p + 1 < 10 ? "0" : "") + std::to_string(p + 1);
    bool has_gold = p < gold_depths.size();

    ordered_json ds_row;
    ds_row["id"] = pid;
    ds_row["question"] = "Synthetic task " + pid +
                         ": combine the tabulated quantities and state the final value.";
    ds_row["answer"] = answers[p];
    dataset_jsonl += ds_row.dump() + "\n";

    if (has_gold) {
      int depth = gold_depths[p];
      ordered_json chain = ordered_json::array();
      std::string prefix;
      for (int k = 0; k < depth; ++k) {
        bool last = k + 1 == depth;
        std::string gold_text =
            last ? "The answer is " + answers[p]
                 : "derive intermediate quantity " + std::to_string(k + 1) + ".\n";
        std::string decoy = "try an unsupported shortcut at stage " + std::to_string(k + 1) + ".\n";
        std::string wrong = "The answer is " + std::to_string(900 + 10 * (int)p + k);

        chain.push_back(gold_text);
        for (int m = 0; m < L; ++m) {
          if (m == k % L)
            scripts[model_ids[(size_t)m]].add(pid, prefix, gold_text, last);
          else
            scripts[model_ids[(size_t)m]].add(pid, prefix, decoy, false);
        }
        // Decoy branches converge to one wrong answer and stop.
        std::string decoy_prefix = prefix + decoy;
        for (int m = 0; m < L; ++m)
          scripts[model_ids[(size_t)m]].add(pid, decoy_prefix, wrong, true);
        prefix += gold_text;
      }
      gold_problems[pid] = std::move(chain);
    } else {
      // No gold chain: a shared opening step, then per-model wrong answers.
      std::string opening = "restate the givens for " + pid + ".\n";
      for (int m = 0; m < L; ++m) {
        scripts[model_ids[(size_t)m]].add(pid, "", opening, false);
        scripts[model_ids[(size_t)m]].add(
            pid, opening, "The answer is " + std::to_string(800 + 3 * (int)p + m), true);
      }
    }
  }

  write_file(root / "synthetic" / "problems.jsonl", dataset_jsonl);
  write_file(root / "synthetic" / "gold_chains.json", gold_doc.dump(2) + "\n");
  for (const auto& [model, script] : scripts)
    write_file(root / "synthetic" / ("model_" + model + ".json"),
               script.to_json().dump(2) + "\n");

  write_file(root / "prompts" / "default.txt", "{prefix}Question: {question}\nAnswer:\n");

  ordered_json scripted = base_config();
  write_file(root / "configs" / "scripted.json", scripted.dump(2) + "\n");

  // Exhaustive-search variant for oracle cross-checks: depth preference off,
  // budget above the largest fixture tree.
  ordered_json oracle_cfg = base_config();
  oracle_cfg["search"]["epsilon"] = 0.0;
  oracle_cfg["search"]["n_iter"] = 600;
  write_file(root / "configs" / "oracle.json", oracle_cfg.dump(2) + "\n");

  std::cout << "fixtures written under " << root.string() << "\n";
  return 0;
}
