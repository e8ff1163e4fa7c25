#include <doctest.h>

#include "stegowav/costing.hpp"

using namespace stegowav;

namespace {

const CostRow& row(const CostReport& r, const std::string& name) {
  for (const auto& x : r.rows)
    if (x.name == name) return x;
  FAIL("missing row " << name);
  return r.rows.front();
}

}  // namespace

TEST_CASE("u-net MACs follow the layer table") {
  const long long s = 32 * 32;
  long long expected = 0;
  expected += s * 8 * 1 * 9 + 8 * s + 8 * s / 4;                // down0, leaky, pool
  expected += s / 4 * 16 * 8 * 9 + 16 * s / 4 + 16 * s / 16;     // down1, leaky, pool
  expected += s / 16 * 32 * 16 * 9 + 32 * s / 16;               // mid, leaky
  expected += 32 * s / 4 + 48 * s / 4 + s / 4 * 16 * 48 * 9 + 16 * s / 4;  // up1
  expected += 16 * s + 24 * s + s * 8 * 24 * 9 + 8 * s;         // up0
  expected += s * 8;                                            // 1x1 out
  CHECK(unet_macs(UNetConfig{2, 8, 3, 1, 1}, 32, 32) == expected);
}

TEST_CASE("cost table deltas") {
  const CostReport r = cost_table(standard_cost_entries(PipelineConfig{}));
  const CostRow& base = row(r, "baseline");
  CHECK(base.param_delta == 0);
  CHECK(base.mac_delta_pct == 0.0);
  CHECK(row(r, "replicate").param_delta == 0);
  CHECK(row(r, "w_replicate").param_delta == 4);
  CHECK(row(r, "w_replicate_large").param_delta == 16);
  CHECK(row(r, "stft_magnitude").macs == base.macs);
  CHECK(row(r, "l1_loss").macs == base.macs);
  CHECK(row(r, "luma").param_delta == 0);
  CHECK(base.macs == row(r, "replicate").macs);
  CHECK(row(r, "ws_replicate").macs < base.macs);
  CHECK(row(r, "multichannel").macs < row(r, "ws_replicate").macs);
  CHECK(row(r, "multichannel").param_delta > 0);

  const CostRow& dual = row(r, "stft_dual");
  CHECK(dual.params == 2 * base.params + 3);
  PipelineConfig cfg = standard_cost_entries(PipelineConfig{})[0].config;
  const EmbeddingContext ctx = cfg.context();
  const Shape out = ctx.reveal_output_shape();
  CHECK(dual.macs == 2 * base.macs + 2 * out[0] * out[1] * out[2]);

  // Luma buffering: 3HW in, 6HW out, at image resolution.
  const CostRow& luma = row(r, "luma");
  CHECK(luma.stages.container == base.stages.container);
  CHECK(luma.stages.image - base.stages.image == 9 * ctx.image_h * ctx.image_w);
}

TEST_CASE("large containers add container-resolution work") {
  const CostReport r = cost_table(standard_cost_entries(PipelineConfig{}));
  for (const std::string m : {"stretch", "replicate", "w_replicate"}) {
    const CostRow& small = row(r, m == "stretch" ? "baseline" : m);
    const CostRow& large = row(r, m + "_large");
    INFO(m);
    CHECK(large.macs > small.macs);
    CHECK(large.stages.image == small.stages.image);
    CHECK(large.stages.container > small.stages.container);
    CHECK(large.stages.image + large.stages.container == large.macs);
  }
}

TEST_CASE("bundle and config counts agree") {
  PipelineConfig cfg;
  cfg.method = EmbeddingMethod::ws_replicate;
  cfg.loss.container = ContainerKind::dual;
  const ModelBundle m = ModelBundle::create(cfg);
  CHECK(count_params(m) == m.param_count());
  CHECK(count_macs(m) == count_macs(cfg));
}

TEST_CASE("cost table output") {
  CHECK_THROWS_AS(cost_table(standard_cost_entries(PipelineConfig{}), "nope"), UsageError);
  const CostReport r = cost_table(standard_cost_entries(PipelineConfig{}));
  const std::string csv = r.csv();
  CHECK(csv.starts_with("name,params,param_delta,macs,mac_delta_pct,paper_param_delta,paper_mac_delta_pct\nbaseline,"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.rows.size()) + 1);
  CHECK(r.text().find("paper baseline: 962128 params, 34.6 GMAC") != std::string::npos);
  CHECK(cost_table(standard_cost_entries(PipelineConfig{})).csv() == csv);
}
