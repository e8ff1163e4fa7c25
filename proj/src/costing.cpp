#include "stegowav/costing.hpp"

#include <algorithm>
#include <cstdio>

#include "stegowav/metrics.hpp"

namespace stegowav {

Index count_params(const PipelineConfig& cfg) { return param_count(cfg); }
Index count_params(const ModelBundle& m) { return count_params(m.config); }

MacBreakdown mac_breakdown(const PipelineConfig& cfg) {
  cfg.validate();
  const ModelBundle shape{cfg, {}};
  const EmbeddingContext ctx = cfg.context();
  const Shape in = ctx.secret_input_shape(), rin = ctx.reveal_input_shape(), rout = ctx.reveal_output_shape();
  const bool reveal_at_container = rin[1] == ctx.container_h && rin[2] == ctx.container_w;
  const long long nets = cfg.loss.container == ContainerKind::dual ? 2 : 1;
  const ArrangementMacs arrange = arrangement_macs(ctx);

  MacBreakdown m;
  m.image += nets * unet_macs(shape.hide_config(), in[1], in[2]);
  m.container += nets * arrange.encode;
  (reveal_at_container ? m.container : m.image) += nets * unet_macs(shape.reveal_config(), rin[1], rin[2]);
  (arrange.decode == ctx.container_h * ctx.container_w ? m.container : m.image) += nets * arrange.decode;
  if (nets == 2) (reveal_at_container ? m.container : m.image) += 2 * rout[0] * rout[1] * rout[2];
  if (cfg.luma && !ctx.outputs_rgb()) {
    // Colour conversion on the way in, luma averaging plus conversion on the way out.
    m.image += 3 * ctx.image_h * ctx.image_w + 6 * ctx.image_h * ctx.image_w;
  }
  return m;
}

long long count_macs(const PipelineConfig& cfg) { return mac_breakdown(cfg).total(); }
long long count_macs(const ModelBundle& m) { return count_macs(m.config); }

CostReport cost_table(const std::vector<CostEntry>& entries, const std::string& baseline) {
  const auto base = std::find_if(entries.begin(), entries.end(), [&](const CostEntry& e) { return e.name == baseline; });
  if (base == entries.end()) throw UsageError("cost table has no baseline row named '" + baseline + "'");
  const Index base_params = count_params(base->config);
  const long long base_macs = count_macs(base->config);
  CostReport report;
  for (const CostEntry& e : entries) {
    CostRow r;
    r.name = e.name;
    r.params = count_params(e.config);
    r.param_delta = r.params - base_params;
    r.stages = mac_breakdown(e.config);
    r.macs = r.stages.total();
    r.mac_delta_pct = 100.0 * static_cast<double>(r.macs - base_macs) / static_cast<double>(base_macs);
    r.paper_param_delta = e.paper_param_delta;
    r.paper_mac_delta_pct = e.paper_mac_delta_pct;
    report.rows.push_back(r);
  }
  return report;
}

namespace {

std::string signed_int(long long v) { return (v > 0 ? "+" : "") + std::to_string(v); }

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

}  // namespace

std::string CostReport::csv() const {
  std::string out = "name,params,param_delta,macs,mac_delta_pct,paper_param_delta,paper_mac_delta_pct\n";
  for (const CostRow& r : rows) {
    out += r.name + "," + std::to_string(r.params) + "," + signed_int(r.param_delta) + "," + std::to_string(r.macs) +
           "," + percent(r.mac_delta_pct) + "," + r.paper_param_delta + "," + r.paper_mac_delta_pct + "\n";
  }
  return out;
}

std::string CostReport::text() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-26s %10s %9s %12s %9s %12s %12s %10s %10s\n", "configuration", "params", "delta",
                "macs", "delta%", "image_macs", "cont_macs", "paper_d", "paper_d%");
  out += line;
  for (const CostRow& r : rows) {
    std::snprintf(line, sizeof line, "%-26s %10ld %9s %12lld %9s %12lld %12lld %10s %10s\n", r.name.c_str(),
                  static_cast<long>(r.params), signed_int(r.param_delta).c_str(), r.macs,
                  percent(r.mac_delta_pct).c_str(), r.stages.image, r.stages.container, r.paper_param_delta.c_str(),
                  r.paper_mac_delta_pct.c_str());
    out += line;
  }
  std::snprintf(line, sizeof line, "paper baseline: %ld params, %.1f GMAC\n", static_cast<long>(kPaperBaselineParams),
                kPaperBaselineGmac);
  out += line;
  out += "note: the paper lists W-Replicate (large) at +4; with 8 replicas weighted at both ends this model has 16.\n";
  return out;
}

std::vector<CostEntry> standard_cost_entries(const PipelineConfig& base_in) {
  PipelineConfig base = base_in;
  base.transform = TransformKind::stdct;
  base.method = EmbeddingMethod::stretch;
  base.loss.container = ContainerKind::magnitude;
  base.loss.wave = WaveLoss::soft_dtw;
  base.large = false;
  base.luma = false;

  std::vector<CostEntry> out;
  auto add = [&](const std::string& name, auto edit, const char* pd, const char* pm) {
    PipelineConfig c = base;
    edit(c);
    out.push_back({name, c, pd, pm});
  };
  add("baseline", [](PipelineConfig&) {}, "+0", "+0%");
  add("stft_magnitude", [](PipelineConfig& c) { c.transform = TransformKind::stft; }, "+0", "+0%");
  add("stft_phase", [](PipelineConfig& c) {
    c.transform = TransformKind::stft;
    c.loss.container = ContainerKind::phase;
  }, "+0", "+0%");
  add("stft_dual", [](PipelineConfig& c) {
    c.transform = TransformKind::stft;
    c.loss.container = ContainerKind::dual;
  }, "+962131", "+100.00%");
  add("l1_loss", [](PipelineConfig& c) { c.loss.wave = WaveLoss::l1; }, "+0", "+0%");
  const std::pair<EmbeddingMethod, std::pair<const char*, const char*>> small[] = {
      {EmbeddingMethod::replicate, {"+0", "+0%"}},
      {EmbeddingMethod::w_replicate, {"+4", "+0%"}},
      {EmbeddingMethod::ws_replicate, {"+584", "-32.89%"}},
      {EmbeddingMethod::multichannel, {"+12735", "-81.68%"}}};
  for (const auto& [m, paper] : small) {
    add(to_string(m), [m = m](PipelineConfig& c) { c.method = m; }, paper.first, paper.second);
  }
  const std::pair<EmbeddingMethod, std::pair<const char*, const char*>> large[] = {
      {EmbeddingMethod::stretch, {"+0", "+200.00%"}},
      {EmbeddingMethod::replicate, {"+0", "+200.00%"}},
      {EmbeddingMethod::w_replicate, {"+4", "+200.00%"}},
      {EmbeddingMethod::ws_replicate, {"+4103", "-30.23%"}},
      {EmbeddingMethod::multichannel, {"+67695", "-73.20%"}}};
  for (const auto& [m, paper] : large) {
    add(to_string(m) + "_large", [m = m](PipelineConfig& c) {
      c.method = m;
      c.large = true;
    }, paper.first, paper.second);
  }
  add("luma", [](PipelineConfig& c) { c.luma = true; }, "+0", "+0%");
  return out;
}

}  // namespace stegowav
