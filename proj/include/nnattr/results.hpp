#pragma once

// Export formats and aggregation for relevance results: named arrays, long
// records, channel aggregation and per-feature summary statistics.

#include <optional>
#include <string>
#include <vector>

#include "nnattr/attribution.hpp"

namespace nnattr {

/// One long-format record per (instance, input entry, selected output).
struct RelevanceRecord {
    std::string data;
    std::string model_input;
    std::string model_output;
    std::string feature;
    std::string feature_2; // second spatial label, images only
    std::string channel;   // channel label, images only
    std::string output_node;
    double value = 0.0;
};

struct NamedArray {
    std::string input_id;
    Shape shape;                                      // [batch x input dims x outputs]
    std::vector<std::vector<std::string>> dim_names;  // instance ids, axis names..., output labels
    std::vector<double> values;                       // row-major
};

std::vector<NamedArray> to_array(const RelevanceResult& result);

/// Deterministic ordering: instance-major, then input layer, then row-major
/// input index, then output.
std::vector<RelevanceRecord> to_records(const RelevanceResult& result);

std::string records_to_csv(const std::vector<RelevanceRecord>& records);
std::string records_to_jsonl(const std::vector<RelevanceRecord>& records);
std::vector<RelevanceRecord> records_from_csv(const std::string& text);
std::vector<RelevanceRecord> records_from_jsonl(const std::string& text);

std::string arrays_to_json(const std::vector<NamedArray>& arrays);

enum class ChannelAggregation { Sum, Mean, L2Norm };

/// Collapses the channel axis of every rank-3 input layer. Errors on tabular
/// results (no channel axis anywhere).
RelevanceResult aggregate_channels(const RelevanceResult& result, ChannelAggregation mode);

enum class Preprocess { Abs, Identity, Square };

struct SummaryCell {
    double q25 = 0, median = 0, q75 = 0, mean = 0, min = 0, max = 0;
    double quantile = 0; // the requested q-quantile (defaults to the median)
    std::optional<double> reference;
};

/// Per (input entry, output) statistics over a subset of instances.
struct SummaryTable {
    std::vector<std::string> input_ids;
    std::vector<Shape> cell_shapes;                  // per layer: per-instance dims
    std::vector<std::vector<SummaryCell>> cells;     // per layer: [cell-major x outputs]
    std::vector<AxisNames> input_names;
    std::vector<std::string> output_labels;

    const SummaryCell& cell(std::size_t layer, std::int64_t flat_index, std::int64_t output) const {
        const auto n_out = static_cast<std::int64_t>(output_labels.size());
        return cells[layer][static_cast<std::size_t>(flat_index * n_out + output)];
    }
};

/// Lower-interpolation (type-1) quantile of the values.
double quantile_type1(std::vector<double> values, double q);

/// instance_subset holds 0-based indices; empty is an error. q in [0,1].
SummaryTable summarize(const RelevanceResult& result, const std::vector<std::int64_t>& instance_subset,
                       double q, Preprocess preprocess,
                       std::optional<std::int64_t> reference_instance = std::nullopt);

std::string format_double(double v);

} // namespace nnattr
