#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowmarket/agents.hpp"
#include "flowmarket/equilibria.hpp"
#include "flowmarket/flownet.hpp"
#include "flowmarket/shaping.hpp"
#include "flowmarket/types.hpp"

namespace flowmarket {

using nlohmann::json;

inline json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Vector vector_from_json(const json& arr) {
  if (!arr.is_array()) throw std::invalid_argument("vector_from_json: expected array");
  Vector v(static_cast<int>(arr.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

// Node indices are 1-based on the wire and 0-based in memory.
inline json network_to_json(const FlowNetwork& net) {
  json arcs = json::array();
  for (const Arc& a : net.arcs()) arcs.push_back(json::array({a.tail + 1, a.head + 1}));
  return json{{"n", net.node_count()}, {"arcs", std::move(arcs)},
              {"u", vector_to_json(net.capacities())}};
}

inline FlowNetwork network_from_json(const json& j) {
  const int n = j.at("n").get<int>();
  std::vector<Arc> arcs;
  for (const json& pair : j.at("arcs")) {
    if (!pair.is_array() || pair.size() != 2)
      throw std::invalid_argument("network_from_json: each arc must be a [tail, head] pair");
    arcs.push_back(Arc{pair[0].get<int>() - 1, pair[1].get<int>() - 1});
  }
  return FlowNetwork(n, arcs, vector_from_json(j.at("u")));
}

inline json agent_to_json(const AgentProfile& ag) {
  return json{{"a", ag.a}, {"theta1", ag.utility.theta1()}, {"theta2", ag.utility.theta2()}};
}

inline AgentProfile agent_from_json(const json& j) {
  return AgentProfile(j.at("a").get<double>(),
                      QuadraticUtility(j.at("theta1").get<double>(),
                                       j.at("theta2").get<double>()));
}

inline json instance_to_json(const MarketInstance& inst) {
  json agents = json::array();
  for (const AgentProfile& ag : inst.agents) agents.push_back(agent_to_json(ag));
  return json{{"network", network_to_json(inst.network)}, {"agents", std::move(agents)}};
}

inline MarketInstance instance_from_json(const json& j) {
  std::vector<AgentProfile> agents;
  for (const json& ag : j.at("agents")) agents.push_back(agent_from_json(ag));
  return MarketInstance(network_from_json(j.at("network")), std::move(agents));
}

inline json solution_to_json(const EquilibriumSolution& sol) {
  return json{{"x", vector_to_json(sol.x)},     {"e", vector_to_json(sol.e)},
              {"y", vector_to_json(sol.y)},     {"beta", sol.beta},
              {"q", vector_to_json(sol.q)},     {"xi", vector_to_json(sol.xi)},
              {"lambda", vector_to_json(sol.lambda)}};
}

inline EquilibriumSolution solution_from_json(const json& j) {
  EquilibriumSolution sol;
  sol.x = vector_from_json(j.at("x"));
  sol.e = vector_from_json(j.at("e"));
  sol.y = vector_from_json(j.at("y"));
  sol.beta = j.at("beta").get<double>();
  sol.q = vector_from_json(j.at("q"));
  sol.xi = vector_from_json(j.at("xi"));
  sol.lambda = vector_from_json(j.at("lambda"));
  return sol;
}

inline json box_to_json(const ParamBox& box) {
  return json{{"theta1_min", box.theta1_min},
              {"theta1_max", box.theta1_max},
              {"theta2_min", box.theta2_min},
              {"theta2_max", box.theta2_max}};
}

inline ParamBox box_from_json(const json& j) {
  return ParamBox(j.at("theta1_min").get<double>(), j.at("theta1_max").get<double>(),
                  j.at("theta2_min").get<double>(), j.at("theta2_max").get<double>());
}

inline json condition_to_json(const ConditionReport& c) {
  return json{{"pass", c.pass}, {"residual", c.residual}};
}

inline json verification_to_json(const CEVerificationReport& rep) {
  return json{{"agent_optimality", condition_to_json(rep.agent_optimality)},
              {"price_identity", condition_to_json(rep.price_identity)},
              {"market_balance", condition_to_json(rep.market_balance)},
              {"flow_feasibility", condition_to_json(rep.flow_feasibility)},
              {"capacity_complementarity", condition_to_json(rep.capacity_complementarity)},
              {"congestion_price_consistency",
               condition_to_json(rep.congestion_price_consistency)},
              {"overall", rep.overall()}};
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_json: cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("save_json: write failed for " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_json: cannot open " + path);
  return json::parse(in);
}

}  // namespace flowmarket
