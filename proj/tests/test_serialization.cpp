#include "flowmarket/json_io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

namespace flowmarket {
namespace {

TEST(NetworkJsonTest, ArcsAreOneBasedOnTheWire) {
  const FlowNetwork net = star_graph(3, Vector::Ones(4));
  const json j = network_to_json(net);
  EXPECT_EQ(j["n"], 3);
  EXPECT_EQ(j["arcs"][0], json::array({1, 2}));
  EXPECT_EQ(j["arcs"][2], json::array({2, 1}));
  EXPECT_EQ(j["u"].size(), 4u);
}

TEST(NetworkJsonTest, BitExactRoundTrip) {
  const FlowNetwork net = generate_er(12, 20, 0.0, 2.0, 99);
  const FlowNetwork back = network_from_json(json::parse(network_to_json(net).dump()));
  ASSERT_EQ(back.node_count(), net.node_count());
  ASSERT_EQ(back.arc_count(), net.arc_count());
  for (int k = 0; k < net.arc_count(); ++k) {
    EXPECT_EQ(back.arcs()[static_cast<std::size_t>(k)], net.arcs()[static_cast<std::size_t>(k)]);
    EXPECT_EQ(back.capacities()(k), net.capacities()(k));
  }
}

TEST(NetworkJsonTest, RejectsMalformedArcs) {
  json j = network_to_json(star_graph(3, Vector::Ones(4)));
  j["arcs"][1] = json::array({1});
  EXPECT_THROW(network_from_json(j), std::invalid_argument);
}

TEST(AgentJsonTest, RoundTripAndSchema) {
  const AgentProfile ag(3.25, QuadraticUtility(0.5625, 19.125));
  const json j = agent_to_json(ag);
  EXPECT_EQ(j.size(), 3u);
  EXPECT_EQ(j["a"], 3.25);
  const AgentProfile back = agent_from_json(json::parse(j.dump()));
  EXPECT_EQ(back.a, ag.a);
  EXPECT_EQ(back.utility.theta1(), ag.utility.theta1());
  EXPECT_EQ(back.utility.theta2(), ag.utility.theta2());
}

TEST(InstanceJsonTest, BundleRoundTripsBitExact) {
  Rng rng(5);
  const FlowNetwork net = generate_er(8, 12, 0.0, 2.0, 5);
  std::vector<AgentProfile> agents;
  for (int i = 0; i < 8; ++i)
    agents.emplace_back(rng.uniform(0.0, 5.0),
                        QuadraticUtility(rng.uniform(0.5, 0.6), rng.uniform(18.0, 20.0)));
  const MarketInstance inst(net, agents);
  const MarketInstance back = instance_from_json(json::parse(instance_to_json(inst).dump()));
  ASSERT_EQ(back.agent_count(), inst.agent_count());
  for (int i = 0; i < inst.agent_count(); ++i) {
    EXPECT_EQ(back.agents[static_cast<std::size_t>(i)].a,
              inst.agents[static_cast<std::size_t>(i)].a);
    EXPECT_EQ(back.agents[static_cast<std::size_t>(i)].utility.theta1(),
              inst.agents[static_cast<std::size_t>(i)].utility.theta1());
  }
  EXPECT_EQ(instance_to_json(back).dump(), instance_to_json(inst).dump());
}

TEST(SolutionJsonTest, RoundTripPreservesEveryField) {
  std::vector<AgentProfile> agents;
  agents.emplace_back(1.0, QuadraticUtility(1.0, 4.0));
  agents.emplace_back(1.0, QuadraticUtility(1.0, 2.0));
  const MarketInstance inst(FlowNetwork(2, {{0, 1}, {1, 0}}, Vector::Constant(2, 0.5)), agents);
  const EquilibriumSolution sol = solve_swe(inst);
  const EquilibriumSolution back = solution_from_json(json::parse(solution_to_json(sol).dump()));
  EXPECT_EQ(back.beta, sol.beta);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(back.x(i), sol.x(i));
    EXPECT_EQ(back.e(i), sol.e(i));
    EXPECT_EQ(back.q(i), sol.q(i));
    EXPECT_EQ(back.lambda(i), sol.lambda(i));
    EXPECT_EQ(back.y(i), sol.y(i));
    EXPECT_EQ(back.xi(i), sol.xi(i));
  }
  const CEVerificationReport rep = verify_ce(inst, back, 1e-6);
  EXPECT_TRUE(rep.agent_optimality.pass);
  EXPECT_TRUE(rep.capacity_complementarity.pass);
}

TEST(BoxJsonTest, RoundTrip) {
  const ParamBox box(0.5, 0.6, 18.0, 20.0);
  const ParamBox back = box_from_json(json::parse(box_to_json(box).dump()));
  EXPECT_EQ(back.theta1_min, 0.5);
  EXPECT_EQ(back.theta1_max, 0.6);
  EXPECT_EQ(back.theta2_min, 18.0);
  EXPECT_EQ(back.theta2_max, 20.0);
  EXPECT_THROW(box_from_json(json{{"theta1_min", 1.0}}), json::out_of_range);
}

TEST(VerificationJsonTest, ReportsAllSixConditions) {
  std::vector<AgentProfile> agents;
  agents.emplace_back(1.0, QuadraticUtility(1.0, 4.0));
  agents.emplace_back(1.0, QuadraticUtility(1.0, 2.0));
  const MarketInstance inst(FlowNetwork(2, {{0, 1}, {1, 0}}, Vector::Constant(2, 1e6)), agents);
  const json j = verification_to_json(verify_ce(inst, solve_swe(inst), 1e-6));
  EXPECT_EQ(j.size(), 7u);
  EXPECT_TRUE(j["market_balance"]["pass"].get<bool>());
  EXPECT_TRUE(j["overall"].get<bool>());
  EXPECT_GE(j["price_identity"]["residual"].get<double>(), 0.0);
}

TEST(JsonFileTest, SaveLoadAndMissingFile) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "flowmarket_json_io_test.json").string();
  const json j = box_to_json(ParamBox(0.5, 0.6, 18.0, 20.0));
  save_json(path, j);
  EXPECT_EQ(load_json(path), j);
  std::remove(path.c_str());
  EXPECT_THROW(load_json(path), std::runtime_error);
  EXPECT_THROW(save_json("/nonexistent_dir_xyz/file.json", j), std::runtime_error);
}

}  // namespace
}  // namespace flowmarket
