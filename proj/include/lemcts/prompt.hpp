#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lemcts/types.hpp"

namespace lemcts {

/**
 * Plain-text prompt template with `{prefix}` and `{question}` placeholders.
 * `{prefix}` expands to the problem's few-shot block verbatim (empty when the
 * problem has none); everything else in the file is the elicitation scaffold.
 */
struct PromptTemplate {
  std::string text = "{prefix}Question: {question}\nAnswer:\n";
};

inline PromptTemplate load_prompt_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open prompt template: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  PromptTemplate t;
  t.text = ss.str();
  if (t.text.find("{question}") == std::string::npos)
    throw std::runtime_error("prompt template missing {question} placeholder: " + path);
  return t;
}

inline std::string build_prompt(const Problem& problem, const PromptTemplate& tmpl = {}) {
  std::string out = tmpl.text;
  auto replace_all = [&out](std::string_view key, const std::string& value) {
    size_t pos = 0;
    while ((pos = out.find(key, pos)) != std::string::npos) {
      out.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  replace_all("{prefix}", problem.prompt_prefix);
  replace_all("{question}", problem.question);
  return out;
}

}  // namespace lemcts
