#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "coughkit/cough_detect.hpp"
#include "coughkit/error.hpp"
#include "json_compat.hpp"

namespace coughkit::detect {

namespace {

using json = nlohmann::json;

enum class Mark { Unvisited, OnPath, Done };

// Walks from the root; a back edge is a cycle, a second parent or an
// orphan is a structural error.
void check_tree_shape(const Tree& tree, const std::string& where) {
  const auto n = tree.nodes.size();
  std::vector<Mark> marks(n, Mark::Unvisited);
  std::vector<int> parents(n, 0);

  struct Frame {
    int node;
    int next_child;
  };
  std::vector<Frame> stack{{0, 0}};
  marks[0] = Mark::OnPath;
  while (!stack.empty()) {
    Frame& top = stack.back();
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(top.node)];
    if (node.is_leaf() || top.next_child == 2) {
      marks[static_cast<std::size_t>(top.node)] = Mark::Done;
      stack.pop_back();
      continue;
    }
    const int child = top.next_child++ == 0 ? node.left : node.right;
    const auto c = static_cast<std::size_t>(child);
    if (marks[c] == Mark::OnPath) {
      throw Error(Errc::CyclicTree, where + ": node " + std::to_string(child) + " is its own ancestor");
    }
    if (++parents[c] > 1 || marks[c] == Mark::Done) {
      throw Error(Errc::SyntaxError, where + ": node " + std::to_string(child) + " has more than one parent");
    }
    marks[c] = Mark::OnPath;
    stack.push_back({child, 0});
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (marks[i] == Mark::Unvisited) {
      throw Error(Errc::SyntaxError, where + ": node " + std::to_string(i) + " is unreachable from the root");
    }
  }
}

void check_tree(const Tree& tree, const std::string& where) {
  if (tree.nodes.empty()) throw Error(Errc::SyntaxError, where + ": tree has no nodes");
  const auto n = static_cast<int>(tree.nodes.size());
  for (int i = 0; i < n; ++i) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(i)];
    const std::string at = where + " node " + std::to_string(i);
    if (node.is_leaf()) {
      if (!std::isfinite(node.leaf)) throw Error(Errc::SyntaxError, at + ": leaf value is not finite");
      continue;
    }
    if (node.feature >= static_cast<int>(kFeatureCount)) {
      throw Error(Errc::UnknownFeature, at + ": feature index " + std::to_string(node.feature));
    }
    if (!std::isfinite(node.threshold)) throw Error(Errc::SyntaxError, at + ": threshold is not finite");
    if (node.left < 0 || node.left >= n || node.right < 0 || node.right >= n) {
      throw Error(Errc::SyntaxError, at + ": child reference out of range");
    }
  }
  check_tree_shape(tree, where);
}

std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
  throw Error(Errc::SyntaxError, "at " + pointer + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& pointer) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(pointer, std::string("missing \"") + key + "\"");
  return *it;
}

double require_number(const json& obj, const char* key, const std::string& pointer) {
  const json& v = require(obj, key, pointer);
  if (!v.is_number()) fail(pointer + "/" + key, "expected a number");
  return v.get<double>();
}

std::int64_t require_id(const json& obj, const char* key, const std::string& pointer) {
  const json& v = require(obj, key, pointer);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    fail(pointer + "/" + key, "expected a non-negative integer node id");
  }
  return v.get<std::int64_t>();
}

Tree parse_tree(const json& doc, const std::string& pointer) {
  if (!doc.is_object()) fail(pointer, "tree must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "nodes") fail(pointer, "unexpected key \"" + key + "\"");
  }
  const json& nodes = require(doc, "nodes", pointer);
  if (!nodes.is_array() || nodes.empty()) fail(pointer + "/nodes", "expected a non-empty array");

  struct Raw {
    TreeNode node;
    std::int64_t yes = -1, no = -1, missing = -1;
  };
  std::map<std::int64_t, Raw> by_id;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string at = pointer + "/nodes/" + std::to_string(i);
    const json& n = nodes[i];
    if (!n.is_object()) fail(at, "node must be an object");
    const std::int64_t id = require_id(n, "id", at);
    Raw raw;
    if (n.contains("leaf")) {
      for (const auto& [key, _] : n.items()) {
        if (key != "id" && key != "leaf") fail(at, "leaf node has unexpected key \"" + key + "\"");
      }
      raw.node = TreeNode::make_leaf(require_number(n, "leaf", at));
    } else {
      static const std::set<std::string> allowed = {"id", "split", "threshold", "yes", "no", "missing"};
      for (const auto& [key, _] : n.items()) {
        if (!allowed.contains(key)) fail(at, "split node has unexpected key \"" + key + "\"");
      }
      const json& split = require(n, "split", at);
      if (!split.is_string()) fail(at + "/split", "expected a feature name");
      const auto feature = feature_index(split.get<std::string>());
      if (!feature) throw Error(Errc::UnknownFeature, "at " + at + "/split: \"" + split.get<std::string>() + "\"");
      raw.node.feature = static_cast<int>(*feature);
      raw.node.threshold = require_number(n, "threshold", at);
      raw.yes = require_id(n, "yes", at);
      raw.no = require_id(n, "no", at);
      raw.missing = n.contains("missing") ? require_id(n, "missing", at) : raw.yes;
      if (raw.missing != raw.yes && raw.missing != raw.no) fail(at + "/missing", "must equal \"yes\" or \"no\"");
    }
    if (!by_id.emplace(id, raw).second) fail(at + "/id", "duplicate node id " + std::to_string(id));
  }
  if (!by_id.contains(0)) fail(pointer, "no root node (id 0)");

  // Dense re-indexing in id order keeps the root at 0.
  std::map<std::int64_t, int> index;
  for (const auto& [id, _] : by_id) index.emplace(id, static_cast<int>(index.size()));
  auto resolve = [&](std::int64_t id, std::int64_t from) {
    const auto it = index.find(id);
    if (it == index.end()) {
      fail(pointer, "node " + std::to_string(from) + " references missing node " + std::to_string(id));
    }
    return it->second;
  };
  Tree tree;
  tree.nodes.reserve(by_id.size());
  for (const auto& [id, raw] : by_id) {
    TreeNode node = raw.node;
    if (!node.is_leaf()) {
      node.left = resolve(raw.yes, id);
      node.right = resolve(raw.no, id);
      node.default_left = raw.missing == raw.yes;
    }
    tree.nodes.push_back(node);
  }
  return tree;
}

}  // namespace

TreeEnsembleModel::TreeEnsembleModel(double base_score, std::vector<Tree> trees)
    : base_score_(base_score), trees_(std::move(trees)) {
  if (!std::isfinite(base_score_)) throw Error(Errc::SyntaxError, "base_score is not finite");
  for (std::size_t t = 0; t < trees_.size(); ++t) check_tree(trees_[t], "tree " + std::to_string(t));
}

double TreeEnsembleModel::margin(const AcousticFeatureVector& x) const noexcept {
  double sum = base_score_;
  for (const Tree& tree : trees_) {
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf()) {
      const double v = x[static_cast<std::size_t>(node->feature)];
      const bool go_left = std::isfinite(v) ? v < node->threshold : node->default_left;
      node = &tree.nodes[static_cast<std::size_t>(go_left ? node->left : node->right)];
    }
    sum += node->leaf;
  }
  return sum;
}

TreeEnsembleModel parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::SyntaxError, line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
  if (!doc.is_object()) fail("/", "document must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "base_score" && key != "feature_names" && key != "trees") fail("/", "unexpected key \"" + key + "\"");
  }

  const double base = require_number(doc, "base_score", "/");
  const json& names = require(doc, "feature_names", "/");
  if (!names.is_array()) fail("/feature_names", "expected an array");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!names[i].is_string()) fail("/feature_names/" + std::to_string(i), "expected a string");
    const auto name = names[i].get<std::string>();
    const auto idx = feature_index(name);
    if (!idx) throw Error(Errc::UnknownFeature, "at /feature_names/" + std::to_string(i) + ": \"" + name + "\"");
    if (*idx != i) fail("/feature_names/" + std::to_string(i), "\"" + name + "\" is out of canonical order");
  }
  if (names.size() != kFeatureCount) {
    fail("/feature_names", "expected " + std::to_string(kFeatureCount) + " names, got " + std::to_string(names.size()));
  }

  const json& trees = require(doc, "trees", "/");
  if (!trees.is_array()) fail("/trees", "expected an array");
  std::vector<Tree> parsed;
  parsed.reserve(trees.size());
  for (std::size_t t = 0; t < trees.size(); ++t) parsed.push_back(parse_tree(trees[t], "/trees/" + std::to_string(t)));
  return TreeEnsembleModel(base, std::move(parsed));
}

TreeEnsembleModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_model(text);
}

std::string dump_model(const TreeEnsembleModel& model) {
  json doc;
  doc["base_score"] = model.base_score();
  doc["feature_names"] = json::array();
  for (const auto name : feature_names()) doc["feature_names"].push_back(std::string(name));
  doc["trees"] = json::array();
  for (const Tree& tree : model.trees()) {
    json nodes = json::array();
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& n = tree.nodes[i];
      json node;
      node["id"] = i;
      if (n.is_leaf()) {
        node["leaf"] = n.leaf;
      } else {
        node["split"] = std::string(feature_names()[static_cast<std::size_t>(n.feature)]);
        node["threshold"] = n.threshold;
        node["yes"] = n.left;
        node["no"] = n.right;
        node["missing"] = n.default_left ? n.left : n.right;
      }
      nodes.push_back(std::move(node));
    }
    doc["trees"].push_back(json{{"nodes", std::move(nodes)}});
  }
  return doc.dump(2) + "\n";
}

double logistic(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

DetectionResult predict_cough_probability(const TreeEnsembleModel& model, const AcousticFeatureVector& x,
                                          std::string source_id) {
  return {logistic(model.margin(x)), std::move(source_id)};
}

std::vector<DetectionResult> filter_by_threshold(std::span<const DetectionResult> results, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error(Errc::InvalidThreshold, "tau must lie in [0, 1]");
  std::vector<DetectionResult> kept;
  for (const auto& r : results) {
    if (r.probability >= tau) kept.push_back(r);
  }
  return kept;
}

}  // namespace coughkit::detect
