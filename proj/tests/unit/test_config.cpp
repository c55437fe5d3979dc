#include "doctest.h"

#include <fstream>

#include "helpers.hpp"
#include "transsplat/config.hpp"
#include "transsplat/scenario.hpp"

using namespace transsplat;
using test_helpers::error_of;

TEST_CASE("config JSON round trip") {
  EditConfig c = toy_scenario(5).config;
  c.residual_mode = ResidualMode::AggregateThenClip;
  c.losses.leak_norm = LeakNorm::SquaredL2;
  c.transport.cost.appearance_metric = AppearanceMetric::SquaredL2;
  nlohmann::json j = to_json(c);
  EditConfig back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.seed == 5);
  CHECK(back.prototypes.count == 4);
  CHECK(back.transport.cost.lambda_geo == 100.0);
}

TEST_CASE("config keys, aliases and rejection") {
  EditConfig c = config_from_json({{"beta_sem", 2.5}, {"loss_leakage_w", 0.25}, {"rho", 0.3}});
  CHECK(c.transport.cost.lambda_sem == 2.5);
  CHECK(c.losses.leak == 0.25);
  CHECK(c.rho == 0.3);
  CHECK(c.rounds == EditConfig{}.rounds);

  CHECK(error_of([] { config_from_json({{"no_such_key", 1}}); }) == ErrorCode::InvalidArgument);
  CHECK(error_of([] { config_from_json({{"rounds", "four"}}); }) == ErrorCode::InvalidArgument);
  CHECK(error_of([] { config_from_json({{"rounds", 0}}); }) == ErrorCode::InvalidArgument);
  CHECK(error_of([] { config_from_json({{"ema_momentum", 1.0}}); }) == ErrorCode::InvalidArgument);
  CHECK(error_of([] { config_from_json({{"residual_mode", "sideways"}}); }) == ErrorCode::InvalidArgument);
  CHECK(error_of([] { config_from_json(nlohmann::json::array()); }) == ErrorCode::InvalidArgument);

  EditConfig d;
  set_config_value(d, "lambda_leak", 0.0);
  CHECK(d.losses.leak == 0.0);
  CHECK(error_of([&] { set_config_value(d, "bogus", 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("config schema covers every key") {
  nlohmann::json schema = config_schema();
  nlohmann::json values = to_json(EditConfig{});
  CHECK(schema.size() == values.size());
  for (auto it = values.begin(); it != values.end(); ++it) {
    REQUIRE(schema.contains(it.key()));
    CHECK(schema[it.key()]["default"] == it.value());
    CHECK_FALSE(schema[it.key()]["description"].get<std::string>().empty());
  }
}

TEST_CASE("load_config reports bad files") {
  auto dir = test_helpers::scratch_dir("config");
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(error_of([&] { load_config(dir / "bad.json"); }) == ErrorCode::InvalidArgument);
  std::ofstream(dir / "good.json") << R"({"steps_per_round": 7})";
  CHECK(load_config(dir / "good.json").steps_per_round == 7);
  std::filesystem::remove_all(dir);
}
