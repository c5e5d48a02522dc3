#pragma once

// Fit artifact: a versioned JSON document holding everything needed to
// rebuild a HaptFit without repeating the quadrature (geometry, priors,
// counts, node evidence) plus the data transform and derived summaries for
// inspection. Loading reassembles the messages from the stored evidence and
// checks that the marginal likelihood is reproduced exactly.
//
// Doubles are written in shortest round-trip form; -inf becomes null.

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "hapt/error.hpp"
#include "hapt/ingest.hpp"
#include "hapt/tree_hmm.hpp"

namespace hapt {

inline constexpr int kFitSchemaVersion = 1;

struct FitArtifact {
  HaptFit fit;
  std::vector<std::string> sample_ids;
  DataTransform transform;
  QuadratureOptions quadrature;
};

namespace detail {

inline nlohmann::ordered_json num(double v) {
  if (v == -INFINITY) return nullptr;
  if (!std::isfinite(v)) throw NonFiniteError("cannot serialize non-finite value " + std::to_string(v));
  return v;
}

inline double num_from(const nlohmann::json& j, const char* what) {
  if (j.is_null()) return -INFINITY;
  if (!j.is_number()) throw InvalidArgument(std::string("fit artifact field '") + what + "' must be a number");
  return j.get<double>();
}

inline nlohmann::ordered_json sis_to_json(const SisConfig& c) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json sup = nlohmann::ordered_json::array();
  for (const auto& s : c.supports) sup.push_back({s.lo, s.hi});
  j["supports"] = sup;
  j["beta"] = c.beta;
  j["root_dist"] = c.root_dist;
  if (c.transition_override) {
    const auto& t = *c.transition_override;
    nlohmann::ordered_json m = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::vector<double> row(t.size());
      for (std::size_t k = 0; k < t.size(); ++k) row[k] = t(i, k);
      m.push_back(row);
    }
    j["transition"] = m;
  }
  return j;
}

inline SisConfig sis_from_json(const nlohmann::json& j) {
  SisConfig c;
  for (const auto& s : j.at("supports")) c.supports.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  c.beta = j.at("beta").get<double>();
  c.root_dist = j.at("root_dist").get<std::vector<double>>();
  if (j.contains("transition")) {
    const auto& m = j.at("transition");
    TransitionMatrix t(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t k = 0; k < m.size(); ++k) t(i, k) = m.at(i).at(k).get<double>();
    c.transition_override = t;
  }
  c.validate();
  return c;
}

}  // namespace detail

inline nlohmann::ordered_json artifact_to_json(const FitArtifact& a) {
  const HaptFit& f = a.fit;
  const auto& tree = f.tree();
  nlohmann::ordered_json j;
  j["format"] = "hapt-fit";
  j["schema_version"] = kFitSchemaVersion;
  j["depth"] = tree.depth();
  j["domain"] = {tree.domain().lo, tree.domain().hi};
  if (tree.uniform_base())
    j["theta0"] = "uniform";
  else
    j["theta0"] = std::vector<double>(tree.theta0_values().begin(), tree.theta0_values().end());
  j["transform"] = {{"lo", a.transform.lo}, {"hi", a.transform.hi}};
  j["quadrature"] = {{"tolerance", a.quadrature.tolerance},
                     {"outer_budget", a.quadrature.outer_budget},
                     {"inner_budget", a.quadrature.inner_budget}};
  j["tau"] = detail::sis_to_json(f.tau_config());
  j["nu"] = detail::sis_to_json(f.nu_config());
  j["sample_ids"] = a.sample_ids;
  nlohmann::ordered_json leaves = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < f.samples(); ++i) leaves.push_back(f.counts().leaf_counts(i, tree.depth()));
  j["leaf_counts"] = leaves;
  j["log_ml"] = detail::num(f.log_ml());
  j["log_ml_tree"] = detail::num(f.log_ml_tree());
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (std::size_t h = 0; h < tree.internal_count(); ++h) {
    const NodeId id = NodeId::from_heap(h);
    nlohmann::ordered_json node;
    node["level"] = id.level;
    node["index"] = id.index;
    node["state_post"] = std::vector<double>(f.state_post(id).begin(), f.state_post(id).end());
    nlohmann::ordered_json ev = nlohmann::ordered_json::array();
    for (const auto& e : f.evidence_row(id)) {
      nlohmann::ordered_json r;
      r["log_evidence"] = detail::num(e.log_evidence);
      r["m1"] = e.m1;
      r["m2"] = e.m2;
      r["vl"] = e.vl;
      r["vr"] = e.vr;
      r["p"] = e.p;
      ev.push_back(r);
    }
    node["evidence"] = ev;
    nodes.push_back(node);
  }
  j["nodes"] = nodes;
  return j;
}

inline FitArtifact artifact_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "hapt-fit") throw InvalidArgument("not a hapt fit artifact");
    if (j.at("schema_version") != kFitSchemaVersion)
      throw InvalidArgument("unsupported fit schema_version " + j.at("schema_version").dump());
    const int depth = j.at("depth").get<int>();
    const Interval dom{j.at("domain").at(0).get<double>(), j.at("domain").at(1).get<double>()};
    BaseMeasure base;
    if (!j.at("theta0").is_string()) base.theta0 = j.at("theta0").get<std::vector<double>>();
    const auto tree = PartitionTree::build(depth, dom, base);
    FitArtifact a;
    a.transform = {j.at("transform").at("lo").get<double>(), j.at("transform").at("hi").get<double>()};
    a.quadrature.tolerance = j.at("quadrature").at("tolerance").get<double>();
    a.quadrature.outer_budget = j.at("quadrature").at("outer_budget").get<std::size_t>();
    a.quadrature.inner_budget = j.at("quadrature").at("inner_budget").get<std::size_t>();
    const auto tau = detail::sis_from_json(j.at("tau"));
    const auto nu = detail::sis_from_json(j.at("nu"));
    a.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    const auto counts =
        CountTable::from_leaf_counts(depth, j.at("leaf_counts").get<std::vector<std::vector<std::int64_t>>>());
    if (counts.samples() != a.sample_ids.size()) throw InvalidArgument("sample_ids and leaf_counts disagree");
    const auto& nodes = j.at("nodes");
    if (nodes.size() != tree.internal_count()) throw InvalidArgument("fit artifact has the wrong node count");
    std::vector<std::vector<NodeEvidence>> ev(nodes.size());
    for (std::size_t h = 0; h < nodes.size(); ++h) {
      const NodeId id = NodeId::from_heap(h);
      if (nodes[h].at("level") != id.level || nodes[h].at("index") != id.index)
        throw InvalidArgument("fit artifact nodes are not in heap order");
      for (const auto& r : nodes[h].at("evidence")) {
        NodeEvidence e;
        e.log_evidence = detail::num_from(r.at("log_evidence"), "log_evidence");
        e.m1 = r.at("m1").get<double>();
        e.m2 = r.at("m2").get<double>();
        e.vl = r.at("vl").get<double>();
        e.vr = r.at("vr").get<double>();
        e.p = r.at("p").get<std::vector<double>>();
        ev[h].push_back(std::move(e));
      }
    }
    a.fit = HaptFit::assemble(tree, counts, tau, nu, std::move(ev));
    const double stored = detail::num_from(j.at("log_ml"), "log_ml");
    if (a.fit.log_ml() != stored)
      throw InvalidArgument("fit artifact is inconsistent: stored log_ml " + format_double(stored) +
                            ", reassembled " + format_double(a.fit.log_ml()));
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed fit artifact: ") + e.what());
  }
}

inline void save_artifact(const std::string& path, const FitArtifact& a) {
  write_file(path, artifact_to_json(a).dump(1) + "\n");
}

inline FitArtifact load_artifact(const std::string& path) {
  const auto text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("fit artifact '" + path + "' is not valid JSON: " + e.what());
  }
  return artifact_from_json(j);
}

}  // namespace hapt
