#pragma once

// Static SVG rendering of relevance records: bar charts for tabular inputs,
// raster heatmaps for image inputs, and box-plot summaries.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nnattr/results.hpp"

namespace nnattr {

enum class PlotKind { Bar, Heatmap, Boxplot };

struct PlotOptions {
    PlotKind kind = PlotKind::Bar;
    std::vector<std::int64_t> data_indices;  // 0-based; bar/heatmap panels or boxplot subset (empty = all)
    std::vector<std::string> output_nodes;   // output node labels (empty = all present)
    ChannelAggregation aggr = ChannelAggregation::Sum;
    std::optional<std::int64_t> ref_instance; // boxplot reference overlay, 0-based
    double quantile = 0.5;                    // boxplot pixel map quantile
    bool same_scale = false;                  // share color scale across input layers
};

/// Renders records into a standalone SVG document (no external resources).
std::string render_plot(const std::vector<RelevanceRecord>& records, const PlotOptions& options);

/// Diverging red-white-blue map; t in [-1, 1], white at 0, red positive.
std::string diverging_color(double t);

} // namespace nnattr
