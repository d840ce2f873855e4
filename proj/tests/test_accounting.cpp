#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lift/accounting.hpp"
#include "lift/vit.hpp"

using lift::ModelConfig;
using lift::QkvMode;

namespace {

ModelConfig deit_tiny(QkvMode mode = QkvMode::pff) {
  ModelConfig cfg;  // defaults are DeiT-T at 224 with 100 classes
  return cfg.with_qkv_mode(mode);
}

}  // namespace

TEST_CASE("DeiT-T parameter count is exactly 5,543,716 (about 5.54M)") {
  CHECK(lift::count_params(deit_tiny()) == 5543716);
}

TEST_CASE("LIFE variant adds exactly 6,912 parameters per block") {
  const auto base = lift::cost_report(deit_tiny());
  const auto life = lift::cost_report(deit_tiny(QkvMode::life));
  CHECK(life.total_params == 5626660);
  CHECK(life.total_params - base.total_params == 82944);
  for (size_t i = 0; i < base.breakdown.size(); ++i) {
    const auto& b = base.breakdown[i];
    const auto& l = life.breakdown[i];
    REQUIRE(b.name == l.name);
    if (b.name.rfind("block.", 0) == 0)
      CHECK(l.params - b.params == 6912);
    else
      CHECK(l.params == b.params);
  }
}

TEST_CASE("shrinking the head from 100 to 10 classes drops 90*(C+1) parameters") {
  auto cfg10 = deit_tiny();
  cfg10.num_classes = 10;
  CHECK(lift::count_params(deit_tiny()) - lift::count_params(cfg10) == 90 * 193);
}

TEST_CASE("MAC counts land on the published GMAC figures within 3 percent") {
  const int64_t base = lift::count_macs(deit_tiny());
  const int64_t life = lift::count_macs(deit_tiny(QkvMode::life));
  CHECK(base == 1253510400);  // closed-form layer-by-layer sum
  CHECK(life == 1268864256);
  CHECK(std::abs(static_cast<double>(base) / 1.26e9 - 1.0) < 0.03);
  CHECK(std::abs(static_cast<double>(life) / 1.27e9 - 1.0) < 0.03);
}

TEST_CASE("doubling num_classes changes MACs by exactly C * delta") {
  auto cfg = deit_tiny();
  auto doubled = cfg;
  doubled.num_classes = 200;
  CHECK(lift::count_macs(doubled) - lift::count_macs(cfg) == 100 * 192);
}

TEST_CASE("overhead report matches the published deltas") {
  const auto base = lift::cost_report(deit_tiny());
  const auto life = lift::cost_report(deit_tiny(QkvMode::life));
  const auto delta = lift::overhead_report(base, life);
  CHECK(delta.params_pct == doctest::Approx(1.50).epsilon(0.01));
  CHECK(delta.macs_pct > 0.0);
  CHECK(delta.macs_pct <= 2.0);
  const auto zero = lift::overhead_report(base, base);
  CHECK(zero.params_pct == 0.0);
  CHECK(zero.macs_pct == 0.0);
}

TEST_CASE("breakdown entries sum to the totals exactly") {
  for (auto mode : {QkvMode::pff, QkvMode::life, QkvMode::life_onescale}) {
    const auto report = lift::cost_report(deit_tiny(mode));
    int64_t params = 0, macs = 0;
    for (const auto& item : report.breakdown) {
      params += item.params;
      macs += item.macs;
    }
    CHECK(params == report.total_params);
    CHECK(macs == report.total_macs);
  }
}

TEST_CASE("counter agrees exactly with the instantiated model for every qkv mode") {
  ModelConfig desk;
  desk.image_size = 32;
  desk.patch_size = 4;
  desk.embed_dim = 48;
  desk.depth = 4;
  desk.num_heads = 3;
  desk.num_classes = 8;
  for (auto mode : {QkvMode::pff, QkvMode::life, QkvMode::life_onescale}) {
    const auto cfg = desk.with_qkv_mode(mode);
    auto params = lift::init_model_params<float>(cfg, 1);
    CHECK(lift::count_params(cfg) == lift::parameter_scalars(params));
  }
  // Full-size check for the headline configuration.
  for (auto mode : {QkvMode::pff, QkvMode::life}) {
    const auto cfg = deit_tiny(mode);
    auto params = lift::init_model_params<float>(cfg, 2);
    CHECK(lift::count_params(cfg) == lift::parameter_scalars(params));
  }
}

TEST_CASE("adding a scale strictly increases both counts") {
  auto one = deit_tiny(QkvMode::life);
  one.kernel_sizes = {1};
  one.paddings = {0};
  auto two = deit_tiny(QkvMode::life);
  two.kernel_sizes = {1, 3};
  two.paddings = {0, 1};
  const auto three = deit_tiny(QkvMode::life);
  CHECK(lift::count_params(one) < lift::count_params(two));
  CHECK(lift::count_params(two) < lift::count_params(three));
  CHECK(lift::count_macs(one) < lift::count_macs(two));
  CHECK(lift::count_macs(two) < lift::count_macs(three));
}

TEST_CASE("cost_report validates its input size") {
  CHECK_THROWS_AS(lift::cost_report(deit_tiny(), 100), lift::Error);
  const auto at_smaller = lift::cost_report(deit_tiny(), 160);
  CHECK(at_smaller.total_macs < lift::count_macs(deit_tiny()));
  CHECK(at_smaller.input_size == 160);
}
