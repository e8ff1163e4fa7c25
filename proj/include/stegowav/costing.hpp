#pragma once

// Parameter and multiply–accumulate accounting per configuration.

#include <optional>
#include <string>
#include <vector>

#include "stegowav/config.hpp"
#include "stegowav/networks.hpp"

namespace stegowav {

/// MACs split by the resolution each stage runs at.
struct MacBreakdown {
  long long image = 0;      ///< stages at the secret's (or shuffled plane's) resolution
  long long container = 0;  ///< stages at the container's resolution
  long long total() const { return image + container; }
};

Index count_params(const PipelineConfig& cfg);
Index count_params(const ModelBundle& m);
/// Conv MACs of every network plus one per output element of each other
/// materialised tensor (arrangement hooks, luma handling, coupling).
MacBreakdown mac_breakdown(const PipelineConfig& cfg);
long long count_macs(const PipelineConfig& cfg);
long long count_macs(const ModelBundle& m);

struct CostEntry {
  std::string name;
  PipelineConfig config;
  std::string paper_param_delta;    ///< as printed in the paper's table, "" when absent
  std::string paper_mac_delta_pct;
};

struct CostRow {
  std::string name;
  Index params = 0;
  Index param_delta = 0;
  long long macs = 0;
  double mac_delta_pct = 0;
  MacBreakdown stages;
  std::string paper_param_delta;
  std::string paper_mac_delta_pct;
};

struct CostReport {
  std::vector<CostRow> rows;
  std::string csv() const;
  /// Aligned columns plus the paper's absolute figures and footnotes.
  std::string text() const;
};

/// Deltas against the entry named `baseline`; usage error when it is missing.
CostReport cost_table(const std::vector<CostEntry>& entries, const std::string& baseline = "baseline");

/// The enhancement rows of the paper's cost table built on `base`
/// (stretch, magnitude container, no luma buffering, small container).
std::vector<CostEntry> standard_cost_entries(const PipelineConfig& base);

inline constexpr Index kPaperBaselineParams = 962128;
inline constexpr double kPaperBaselineGmac = 34.6;

}  // namespace stegowav
