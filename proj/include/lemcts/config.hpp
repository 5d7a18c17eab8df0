#pragma once

#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lemcts/generator.hpp"
#include "lemcts/harness.hpp"
#include "lemcts/reward.hpp"
#include "lemcts/types.hpp"

namespace lemcts::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

inline GenerationParams parse_generation(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"mode", "temperature", "top_p", "max_tokens_per_step", "stop"}, where);
  GenerationParams p;
  if (j.contains("mode")) p.mode = gen_mode_from_string(j["mode"].get<std::string>());
  if (j.contains("temperature")) p.temperature = j["temperature"].get<double>();
  if (j.contains("top_p")) p.top_p = j["top_p"].get<double>();
  if (j.contains("max_tokens_per_step"))
    p.max_tokens_per_step = j["max_tokens_per_step"].get<int>();
  if (j.contains("stop")) p.stop = j["stop"].get<std::vector<std::string>>();
  return p;
}

inline HttpConfig parse_http(const nlohmann::json& j, const std::string& where) {
  HttpConfig h;
  h.endpoint = j.at("endpoint").get<std::string>();
  h.timeout_ms = j.value("timeout_ms", 30000);
  h.retries = j.value("retries", 3);
  h.backoff_ms = j.value("backoff_ms", 250);
  h.max_in_flight = j.value("max_in_flight", 8);
  if (j.contains("auth_token_env")) {
    const char* tok = std::getenv(j["auth_token_env"].get<std::string>().c_str());
    if (tok) h.auth_token = tok;
  }
  if (h.endpoint.empty()) throw ConfigError("config: empty endpoint in " + where);
  return h;
}

}  // namespace detail

/**
 * File-based configuration for the command-line tools. Parsed strictly:
 * unknown keys are rejected by name so typos cannot silently change a run.
 */
struct CliConfig {
  SearchConfig search;
  BaselineConfig baseline;
  nlohmann::json pool_spec = nlohmann::json::array();
  nlohmann::json prm_spec;
  std::string dataset_path;
  harness::DatasetOptions dataset_options;
  std::string prompt_template_path;
  std::string output_dir = "out";
  nlohmann::ordered_json echo;  // the raw document, for provenance
};

inline CliConfig parse_config(const nlohmann::json& doc) {
  using detail::reject_unknown_keys;
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(
      doc, {"search", "baseline", "pool", "prm", "dataset", "prompt_template", "output_dir"},
      "top level");

  CliConfig cfg;
  cfg.echo = doc;

  if (doc.contains("search")) {
    const auto& s = doc["search"];
    reject_unknown_keys(s,
                        {"n_iter", "C", "n_child", "epsilon", "backprop", "aggregator", "seed",
                         "depth_cap", "selection_rule", "expansion_retry_budget", "generation"},
                        "search");
    if (s.contains("n_iter")) cfg.search.n_iter = s["n_iter"].get<int>();
    if (s.contains("C")) cfg.search.C = s["C"].get<double>();
    if (s.contains("n_child")) cfg.search.n_child = s["n_child"].get<int>();
    if (s.contains("epsilon")) cfg.search.epsilon = s["epsilon"].get<double>();
    if (s.contains("backprop"))
      cfg.search.backprop = backprop_from_string(s["backprop"].get<std::string>());
    if (s.contains("aggregator"))
      cfg.search.aggregator = aggregator_from_string(s["aggregator"].get<std::string>());
    if (s.contains("seed")) cfg.search.seed = s["seed"].get<uint64_t>();
    if (s.contains("depth_cap")) cfg.search.depth_cap = s["depth_cap"].get<int>();
    if (s.contains("selection_rule"))
      cfg.search.selection_rule = selection_rule_from_string(s["selection_rule"].get<std::string>());
    if (s.contains("expansion_retry_budget"))
      cfg.search.expansion_retry_budget = s["expansion_retry_budget"].get<int>();
    if (s.contains("generation"))
      cfg.search.generation = detail::parse_generation(s["generation"], "search.generation");
  }

  if (doc.contains("baseline")) {
    const auto& b = doc["baseline"];
    reject_unknown_keys(b,
                        {"n_samples", "beam_width", "candidates_per_step", "aggregator", "seed",
                         "depth_cap", "generation"},
                        "baseline");
    if (b.contains("n_samples")) cfg.baseline.n_samples = b["n_samples"].get<int>();
    if (b.contains("beam_width")) cfg.baseline.beam_width = b["beam_width"].get<int>();
    if (b.contains("candidates_per_step"))
      cfg.baseline.candidates_per_step = b["candidates_per_step"].get<int>();
    if (b.contains("aggregator"))
      cfg.baseline.aggregator = aggregator_from_string(b["aggregator"].get<std::string>());
    if (b.contains("seed")) cfg.baseline.seed = b["seed"].get<uint64_t>();
    if (b.contains("depth_cap")) cfg.baseline.depth_cap = b["depth_cap"].get<int>();
    if (b.contains("generation"))
      cfg.baseline.generation = detail::parse_generation(b["generation"], "baseline.generation");
  }

  if (doc.contains("pool")) {
    if (!doc["pool"].is_array() || doc["pool"].empty())
      throw ConfigError("config: pool must be a non-empty array");
    for (const auto& m : doc["pool"]) {
      reject_unknown_keys(m,
                          {"model_id", "kind", "script", "endpoint", "model", "completions_path",
                           "timeout_ms", "retries", "backoff_ms", "max_in_flight",
                           "auth_token_env"},
                          "pool entry");
      if (!m.contains("model_id")) throw ConfigError("config: pool entry missing model_id");
      std::string kind = m.value("kind", "scripted");
      if (kind != "scripted" && kind != "http")
        throw ConfigError("config: unknown pool kind '" + kind + "'");
      if (kind == "scripted" && !m.contains("script"))
        throw ConfigError("config: scripted pool entry missing script");
      if (kind == "http" && !m.contains("endpoint"))
        throw ConfigError("config: http pool entry missing endpoint");
    }
    cfg.pool_spec = doc["pool"];
  }

  if (doc.contains("prm")) {
    const auto& p = doc["prm"];
    reject_unknown_keys(p,
                        {"kind", "path", "seed", "off_chain_max", "lo", "hi", "drift", "endpoint",
                         "score_path", "timeout_ms", "retries", "backoff_ms", "max_in_flight",
                         "auth_token_env"},
                        "prm");
    std::string kind = p.value("kind", "");
    static const std::set<std::string> kinds{"table", "gold_chain", "uniform", "random_walk",
                                             "http"};
    if (!kinds.count(kind)) throw ConfigError("config: unknown prm kind '" + kind + "'");
    cfg.prm_spec = p;
  }

  if (doc.contains("dataset")) {
    const auto& d = doc["dataset"];
    reject_unknown_keys(
        d, {"path", "name", "question_field", "answer_field", "id_field", "prompt_prefix_field"},
        "dataset");
    cfg.dataset_path = d.value("path", "");
    cfg.dataset_options.name = d.value("name", "");
    if (d.contains("question_field"))
      cfg.dataset_options.question_field = d["question_field"].get<std::string>();
    if (d.contains("answer_field"))
      cfg.dataset_options.answer_field = d["answer_field"].get<std::string>();
    if (d.contains("id_field")) cfg.dataset_options.id_field = d["id_field"].get<std::string>();
    if (d.contains("prompt_prefix_field"))
      cfg.dataset_options.prompt_prefix_field = d["prompt_prefix_field"].get<std::string>();
  }

  if (doc.contains("prompt_template"))
    cfg.prompt_template_path = doc["prompt_template"].get<std::string>();
  if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();

  cfg.search.validate();
  cfg.baseline.validate();
  return cfg;
}

inline CliConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config: invalid JSON in " + path);
  return parse_config(doc);
}

/// Instantiate the generator pool named by the config. Relative script paths
/// resolve against `base_dir`.
inline GeneratorPool build_pool(const CliConfig& cfg, const std::string& base_dir = {},
                                const PromptTemplate& tmpl = {}) {
  if (cfg.pool_spec.empty()) throw ConfigError("config: no pool configured");
  auto resolve = [&](const std::string& p) {
    if (p.empty() || p.front() == '/' || base_dir.empty()) return p;
    return base_dir + "/" + p;
  };
  GeneratorPool pool;
  std::set<std::string> ids;
  for (const auto& m : cfg.pool_spec) {
    std::string id = m.at("model_id").get<std::string>();
    if (!ids.insert(id).second) throw ConfigError("config: duplicate model_id '" + id + "'");
    if (m.value("kind", "scripted") == "scripted") {
      pool.push_back(make_scripted_generator(id, ScriptTable::load(resolve(m["script"].get<std::string>()))));
    } else {
      HttpBackendConfig hc;
      hc.http = detail::parse_http(m, "pool entry");
      hc.model = m.value("model", id);
      hc.completions_path = m.value("completions_path", "/v1/completions");
      hc.prompt_template = tmpl;
      pool.push_back(make_http_generator(id, std::move(hc)));
    }
  }
  return pool;
}

inline PrmHandle build_prm(const CliConfig& cfg, const std::string& base_dir = {}) {
  if (cfg.prm_spec.is_null()) throw ConfigError("config: no prm configured");
  auto resolve = [&](const std::string& p) {
    if (p.empty() || p.front() == '/' || base_dir.empty()) return p;
    return base_dir + "/" + p;
  };
  const auto& p = cfg.prm_spec;
  std::string kind = p.at("kind").get<std::string>();
  uint64_t seed = p.value("seed", uint64_t{0});
  if (kind == "table") return make_table_prm(TablePrm::load(resolve(p.at("path").get<std::string>())));
  if (kind == "gold_chain")
    return make_gold_chain_prm(GoldChainPrm::load(resolve(p.at("path").get<std::string>()), seed));
  if (kind == "uniform") return make_uniform_prm(seed, p.value("lo", 0.0), p.value("hi", 1.0));
  if (kind == "random_walk") return make_random_walk_prm(seed, p.value("drift", 0.25));
  return make_http_prm(detail::parse_http(p, "prm"), p.value("score_path", "/score"));
}

inline bool pool_is_scripted(const GeneratorPool& pool) {
  for (const auto& m : pool)
    if (m->kind() != GeneratorKind::scripted) return false;
  return true;
}

}  // namespace lemcts::cli
