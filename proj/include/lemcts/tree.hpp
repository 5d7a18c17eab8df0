#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lemcts/types.hpp"

namespace lemcts {

using NodeId = int;
inline constexpr NodeId kNoNode = -1;

/**
 * One search-tree node. The root carries no step and no reward; every other
 * node stores the step that extended its parent's trajectory plus the process
 * reward that step received.
 *
 * `value`/`visits` follow the usual MCTS bookkeeping: a fresh node starts at
 * value = reward, visits = 1, and backpropagation keeps visits equal to the
 * node's subtree size.
 */
struct Node {
  NodeId id = kNoNode;
  NodeId parent = kNoNode;
  std::optional<Step> step;
  double value = 0.0;
  int visits = 1;
  std::optional<double> reward;
  bool terminal = false;
  bool truncated = false;  // depth cap hit before a final step
  bool dead = false;       // no expandable descendants remain
  int depth = 0;           // steps from root; root is 0
  std::vector<NodeId> children;

  bool is_root() const { return parent == kNoNode; }
};

class SearchTree {
public:
  SearchTree() = default;

  bool empty() const { return nodes_.empty(); }
  size_t size() const { return nodes_.size(); }
  NodeId root() const { return nodes_.empty() ? kNoNode : 0; }

  Node& node(NodeId id) {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
      throw std::out_of_range("unknown node id: " + std::to_string(id));
    return nodes_[static_cast<size_t>(id)];
  }
  const Node& node(NodeId id) const { return const_cast<SearchTree*>(this)->node(id); }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& nodes() { return nodes_; }

  NodeId append(Node n) {
    n.id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

private:
  std::vector<Node> nodes_;
};

// ============================================================================
// Tree operations
// ============================================================================

/**
 * Create a node. With no parent this creates the root (value 0, visits 1);
 * otherwise the step and its reward seed the child (value = reward, visits
 * = 1, terminal when the step is final).
 */
inline NodeId create_node(SearchTree& tree, std::optional<NodeId> parent,
                          std::optional<Step> step, std::optional<double> reward = {}) {
  if (parent.has_value() != step.has_value())
    throw std::invalid_argument(parent ? "create_node: non-root node requires a step"
                                       : "create_node: step given without a parent");
  Node n;
  if (!parent) {
    if (!tree.empty()) throw std::invalid_argument("create_node: tree already has a root");
    return tree.append(std::move(n));
  }
  Node& p = tree.node(*parent);  // throws on unknown id
  if (p.terminal) throw std::invalid_argument("create_node: parent is terminal");
  if (step->text.empty()) throw std::invalid_argument("create_node: empty step text");
  n.parent = *parent;
  n.depth = p.depth + 1;
  n.terminal = step->final;
  n.step = std::move(step);
  n.reward = reward;
  n.value = reward.value_or(0.0);
  NodeId id = tree.append(std::move(n));
  tree.node(*parent).children.push_back(id);
  return id;
}

/// Trajectory from the root to `id`; the root contributes no step.
inline Trajectory path_of(const SearchTree& tree, NodeId id, const std::string& problem_id = {}) {
  Trajectory t;
  t.problem_id = problem_id;
  std::vector<const Step*> rev;
  NodeId cur = id;
  while (cur != kNoNode) {
    const Node& n = tree.node(cur);
    if (n.step) rev.push_back(&*n.step);
    cur = n.parent;
  }
  t.steps.reserve(rev.size());
  for (auto it = rev.rbegin(); it != rev.rend(); ++it) t.steps.push_back(**it);
  if (!t.steps.empty()) t.truncated = tree.node(id).truncated;
  return t;
}

inline double max_child_value(const SearchTree& tree, const Node& n) {
  double m = 0.0;
  bool any = false;
  for (NodeId c : n.children) {
    double v = tree.node(c).value;
    if (!any || v > m) m = v;
    any = true;
  }
  if (!any) throw std::logic_error("max_child_value: node has no children");
  return m;
}

/**
 * A node stops accepting children once it has `n_child` of them, or once its
 * best child's value comes within `epsilon` of the node's own value (the
 * depth-preference rule). A childless node is never fully expanded, epsilon
 * <= 0 disables the depth-preference rule, and the rule never applies at the
 * root: the root's value is an arbitrary initializer, not a step reward, so
 * only the child-count cap is meaningful there.
 */
inline bool is_fully_expanded(const SearchTree& tree, NodeId id, int n_child, double epsilon) {
  const Node& n = tree.node(id);
  if (n.terminal) return true;
  if (static_cast<int>(n.children.size()) >= n_child) return true;
  if (n.children.empty()) return false;
  if (n.is_root() || epsilon <= 0.0) return false;
  return n.value - max_child_value(tree, n) < epsilon;
}

/// Node count of the subtree rooted at `id`, itself included.
inline int subtree_size(const SearchTree& tree, NodeId id) {
  int count = 0;
  std::vector<NodeId> stack{tree.node(id).id};
  while (!stack.empty()) {
    NodeId cur = stack.back();
    stack.pop_back();
    ++count;
    const Node& n = tree.node(cur);
    stack.insert(stack.end(), n.children.begin(), n.children.end());
  }
  return count;
}

// ============================================================================
// JSON dump
// ============================================================================

/// Stable-order JSON document {root, nodes:[...]}, ids creation-ordered.
inline nlohmann::ordered_json tree_to_json(const SearchTree& tree) {
  nlohmann::ordered_json doc;
  doc["root"] = tree.root();
  auto& arr = doc["nodes"] = nlohmann::ordered_json::array();
  for (const Node& n : tree.nodes()) {
    nlohmann::ordered_json j;
    j["id"] = n.id;
    if (n.is_root()) j["parent"] = nullptr; else j["parent"] = n.parent;
    if (n.step) {
      j["step_text"] = n.step->text;
      j["producer"] = n.step->producer;
    } else {
      j["step_text"] = nullptr;
      j["producer"] = nullptr;
    }
    j["value"] = n.value;
    j["visits"] = n.visits;
    if (n.reward) j["reward"] = *n.reward; else j["reward"] = nullptr;
    j["terminal"] = n.terminal;
    j["truncated"] = n.truncated;
    arr.push_back(std::move(j));
  }
  return doc;
}

inline std::string dump_tree(const SearchTree& tree) { return tree_to_json(tree).dump(2) + "\n"; }

/// Rebuild a tree from its dump. Child order follows creation order.
inline SearchTree tree_from_json(const nlohmann::json& doc) {
  SearchTree tree;
  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    throw std::runtime_error("tree dump: missing nodes array");
  for (const auto& j : doc["nodes"]) {
    Node n;
    n.id = j.at("id").get<NodeId>();
    if (n.id != static_cast<NodeId>(tree.size()))
      throw std::runtime_error("tree dump: node ids must be creation-ordered");
    n.parent = j.at("parent").is_null() ? kNoNode : j.at("parent").get<NodeId>();
    if (!j.at("step_text").is_null()) {
      Step s;
      s.text = j.at("step_text").get<std::string>();
      s.producer = j.at("producer").is_null() ? "" : j.at("producer").get<std::string>();
      s.final = j.at("terminal").get<bool>() && !j.at("truncated").get<bool>();
      n.step = std::move(s);
    }
    n.value = j.at("value").get<double>();
    n.visits = j.at("visits").get<int>();
    if (!j.at("reward").is_null()) n.reward = j.at("reward").get<double>();
    n.terminal = j.at("terminal").get<bool>();
    n.truncated = j.at("truncated").get<bool>();
    tree.append(std::move(n));
  }
  // Restore links and depths.
  for (Node& n : tree.nodes()) {
    if (n.parent == kNoNode) continue;
    Node& p = tree.node(n.parent);
    p.children.push_back(n.id);
    n.depth = p.depth + 1;
  }
  return tree;
}

}  // namespace lemcts
