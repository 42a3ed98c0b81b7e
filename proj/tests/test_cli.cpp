#include <gtest/gtest.h>

#include <string>

#include "geocon/cli.hpp"

using namespace geocon;

namespace {

const std::string kDir = GEOCON_SCENARIO_DIR;

Scenario scenario(const std::string& name) { return load_scenario(kDir + "/" + name + ".json"); }

std::string schema_pointer(const std::string& text) {
  try {
    parse_scenario_text(text);
  } catch (const SchemaError& e) {
    return e.pointer();
  }
  return "<no error>";
}

const char* kMinimal = R"({"name": "t", "chart": ["x"], "controls": ["u"], "system": {"inputs": [["1"]]}})";

}  // namespace

TEST(Scenario, MinimalParses) {
  const Scenario sc = parse_scenario_text(kMinimal);
  EXPECT_EQ(sc.system.m(), 1u);
  EXPECT_EQ(sc.system.k(), 1u);
  EXPECT_FALSE(sc.reference);
  EXPECT_EQ(sc.digest.rfind("fnv1a64:", 0), 0u);
}

TEST(Scenario, SchemaPointers) {
  EXPECT_EQ(schema_pointer(R"({"chart": ["x"], "system": {}})"), "/name");
  EXPECT_EQ(schema_pointer(R"({"name": "t", "chart": ["x"], "system": {"inputs": [["1", "0"]]}, "controls": ["u"]})"),
            "/system/inputs/0");
  EXPECT_EQ(schema_pointer(R"({"name": "t", "chart": ["x"], "system": {"inputs": [["y"]]}, "controls": ["u"]})"),
            "/system/inputs/0/0");
  EXPECT_EQ(schema_pointer(R"({"name": "t", "chart": ["x"], "system": {}, "colour": 1})"), "/colour");
  EXPECT_EQ(schema_pointer(R"({"name": "t", "chart": ["x"], "controls": ["u"], "system": {"inputs": [["1"]]},
                               "reference": {"initial_point": [0, 1], "interval": [0, 1],
                                             "controls": [{"t": 0, "u": [0]}]}})"),
            "/reference/initial_point");
}

TEST(Scenario, SystemAndMechanicsAreExclusive) {
  const char* both = R"({"name": "t", "chart": ["x"], "system": {},
                         "mechanics": {"velocities": ["v"], "christoffel": [[["0"]]]}})";
  const char* neither = R"({"name": "t", "chart": ["x"]})";
  EXPECT_THROW(parse_scenario_text(both), SchemaError);
  EXPECT_THROW(parse_scenario_text(neither), SchemaError);
}

TEST(Scenario, MissingReferenceForPca) {
  try {
    run_command("pca", parse_scenario_text(kMinimal));
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.pointer(), "/reference");
  }
}

TEST(Commands, MartinetPca) {
  const auto res = run_command("pca", scenario("martinet"));
  EXPECT_EQ(res.exit_code, kExitOk);
  const Json j = Json::parse(res.text);
  EXPECT_EQ(j["schema_version"], "1.0");
  EXPECT_EQ(j["command"], "pca");
  EXPECT_EQ(j["ladder"]["stabilized_at"], 1);
  for (const auto& s : j["ladder"]["samples"]) {
    ASSERT_EQ(s["annihilator"].size(), 1u);
    EXPECT_EQ(s["annihilator"][0], Json::parse("[0, 0, 1]"));
  }
}

TEST(Commands, HeisenbergPcaTrivial) {
  const Json j = Json::parse(run_command("pca", scenario("heisenberg")).text);
  EXPECT_EQ(j["ladder"]["verdict"].get<std::string>().rfind("annihilator trivial", 0), 0u);
  for (const auto& s : j["ladder"]["samples"]) EXPECT_TRUE(s["annihilator"].empty());
}

TEST(Commands, MartinetAuditPasses) {
  CliOptions opt;
  opt.covector = std::vector<double>{0, 0, 1};
  const auto res = run_command("audit", scenario("martinet"), opt);
  EXPECT_EQ(res.exit_code, kExitOk);
  const Json j = Json::parse(res.text);
  EXPECT_TRUE(j["all_pass"].get<bool>());
  EXPECT_EQ(j["conditions"].size(), 5u);
}

TEST(Commands, FlatConnectionMechCheck) {
  const auto res = run_command("mech-check", scenario("flat-connection"));
  EXPECT_EQ(res.exit_code, kExitOk);
  EXPECT_TRUE(Json::parse(res.text)["all_pass"].get<bool>());
}

TEST(Commands, ReportsAreDeterministicAndRoundTrip) {
  const Scenario sc = scenario("martinet");
  CliOptions opt;
  opt.seed = 17;
  for (const std::string cmd : {"bracket", "cone", "pca", "extremal"}) {
    const auto a = run_command(cmd, sc, opt);
    const auto b = run_command(cmd, sc, opt);
    EXPECT_EQ(a.text, b.text) << cmd;
    const Json j = Json::parse(a.text);
    EXPECT_EQ(j["seed"], 17);
    EXPECT_EQ(j["scenario_digest"], sc.digest);
    EXPECT_EQ(Json::parse(j.dump()), j) << cmd;
  }
}

TEST(Commands, FlowCsvHeader) {
  const auto res = run_command("flow", scenario("martinet"));
  EXPECT_TRUE(res.csv);
  EXPECT_EQ(res.text.substr(0, res.text.find('\n')), "t,x1,x2,x3");
  const auto var = run_command("variation", scenario("martinet"));
  EXPECT_EQ(var.text.substr(0, var.text.find('\n')), "s,x1,x2,x3");
}

TEST(Commands, UnknownCommand) { EXPECT_THROW(run_command("frobnicate", scenario("martinet")), InvalidArgument); }

TEST(Helpers, NumberListAndBrackets) {
  EXPECT_EQ(parse_number_list("0, 0.5,-1"), (std::vector<double>{0, 0.5, -1}));
  EXPECT_THROW(parse_number_list("1,a"), InvalidArgument);
  const Scenario sc = scenario("martinet");
  const VectorField b = parse_bracket(sc.system, "[X1,[X1,X2]]");
  EXPECT_EQ(b.eval<double>({0.3, 0, 0}), (std::vector<double>{0, 0, 2}));
  EXPECT_THROW(parse_bracket(sc.system, "[X1,X7]"), UnknownIdentifierError);
}
