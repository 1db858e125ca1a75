#include <fstream>
#include <sstream>

#include <json.hpp>

#include "govprobe/error.hpp"
#include "govprobe/probes.hpp"

namespace govprobe {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json layer_to_json(const DenseLayer& l) {
  return {{"inputs", l.inputs}, {"outputs", l.outputs}, {"weights", l.weights}, {"bias", l.bias}};
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer l;
  l.inputs = j.at("inputs").get<int>();
  l.outputs = j.at("outputs").get<int>();
  l.weights = j.at("weights").get<std::vector<double>>();
  l.bias = j.at("bias").get<std::vector<double>>();
  if (l.inputs < 1 || l.outputs < 1 || l.weights.size() != static_cast<std::size_t>(l.inputs) * static_cast<std::size_t>(l.outputs) ||
      l.bias.size() != static_cast<std::size_t>(l.outputs)) {
    throw ValidationError("probe JSON: dense layer shape mismatch");
  }
  return l;
}

json tree_to_json(const DecisionTree& t) {
  json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(), value = json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.positive_fraction);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"positive_fraction", value}};
}

DecisionTree tree_from_json(const json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("positive_fraction").get<std::vector<double>>();
  const auto n = feature.size();
  if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || value.size() != n) {
    throw ValidationError("probe JSON: malformed tree");
  }
  DecisionTree t;
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes[i];
    node.feature = feature[i];
    node.threshold = threshold[i];
    node.left = left[i];
    node.right = right[i];
    node.positive_fraction = value[i];
    if (node.feature >= 0) {
      const auto ok = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
      if (!ok(node.left) || !ok(node.right)) throw ValidationError("probe JSON: tree child index out of range");
    }
  }
  return t;
}

}  // namespace

std::string probe_to_json(const TrainedProbe& probe) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = std::string(to_string(probe.kind));
  j["feature_dim"] = probe.feature_dim;
  json heads = json::array();
  for (const auto& h : probe.head_index_map) heads.push_back({h.layer, h.head});
  j["head_index_map"] = heads;
  if (probe.standardizer) {
    j["standardizer"] = {{"mean", probe.standardizer->mean}, {"scale", probe.standardizer->scale}};
  } else {
    j["standardizer"] = nullptr;
  }
  j["report"] = {{"iterations", probe.report.iterations},
                 {"converged", probe.report.converged},
                 {"final_loss", probe.report.final_loss}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogRegParams>) {
          j["logreg"] = {{"weights", p.weights}, {"bias", p.bias}};
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          json layers = json::array();
          for (const auto& l : p.layers) layers.push_back(layer_to_json(l));
          j["mlp"] = {{"layers", layers}};
        } else {
          json trees = json::array();
          for (const auto& t : p.trees) trees.push_back(tree_to_json(t));
          j["forest"] = {{"trees", trees}};
        }
      },
      probe.params);
  return j.dump();
}

TrainedProbe probe_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format_version").get<int>() != kFormatVersion) throw ValidationError("probe JSON: unsupported format_version");
    TrainedProbe probe;
    probe.kind = parse_probe_kind(j.at("kind").get<std::string>());
    probe.feature_dim = j.at("feature_dim").get<std::size_t>();
    for (const auto& h : j.at("head_index_map")) probe.head_index_map.push_back({h.at(0).get<int>(), h.at(1).get<int>()});
    if (!probe.head_index_map.empty() && probe.head_index_map.size() != probe.feature_dim) {
      throw ValidationError("probe JSON: head_index_map length does not match feature_dim");
    }
    if (const auto& s = j.at("standardizer"); !s.is_null()) {
      Standardizer st{s.at("mean").get<std::vector<double>>(), s.at("scale").get<std::vector<double>>()};
      if (st.mean.size() != probe.feature_dim || st.scale.size() != probe.feature_dim) {
        throw ValidationError("probe JSON: standardizer length mismatch");
      }
      probe.standardizer = std::move(st);
    }
    const auto& r = j.at("report");
    probe.report = {r.at("iterations").get<int>(), r.at("converged").get<bool>(), r.at("final_loss").get<double>()};

    switch (probe.kind) {
      case ProbeKind::LogReg: {
        LogRegParams p{j.at("logreg").at("weights").get<std::vector<double>>(), j.at("logreg").at("bias").get<double>()};
        if (p.weights.size() != probe.feature_dim) throw ValidationError("probe JSON: weight count mismatch");
        probe.params = std::move(p);
        break;
      }
      case ProbeKind::Mlp1:
      case ProbeKind::Mlp2: {
        MlpParams p;
        for (const auto& l : j.at("mlp").at("layers")) p.layers.push_back(layer_from_json(l));
        const std::size_t want = probe.kind == ProbeKind::Mlp1 ? 2 : 3;
        if (p.layers.size() != want || static_cast<std::size_t>(p.layers.front().inputs) != probe.feature_dim ||
            p.layers.back().outputs != 1) {
          throw ValidationError("probe JSON: MLP layer structure mismatch");
        }
        for (std::size_t i = 1; i < p.layers.size(); ++i) {
          if (p.layers[i].inputs != p.layers[i - 1].outputs) throw ValidationError("probe JSON: MLP layer sizes do not chain");
        }
        probe.params = std::move(p);
        break;
      }
      case ProbeKind::RandomForest: {
        ForestParams p;
        for (const auto& t : j.at("forest").at("trees")) {
          p.trees.push_back(tree_from_json(t));
          for (const auto& n : p.trees.back().nodes) {
            if (n.feature >= static_cast<int>(probe.feature_dim)) throw ValidationError("probe JSON: tree feature out of range");
          }
        }
        if (p.trees.empty()) throw ValidationError("probe JSON: forest has no trees");
        probe.params = std::move(p);
        break;
      }
    }
    return probe;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("probe JSON: ") + e.what());
  }
}

void save_probe(const std::string& path, const TrainedProbe& probe) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << probe_to_json(probe) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

TrainedProbe load_probe(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return probe_from_json(ss.str());
}

}  // namespace govprobe
