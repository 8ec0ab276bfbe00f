#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nnattr/model.hpp"

namespace nnattr {

/// Parses and validates a model document (see docs/format.md).
/// Throws ParseError / ShapeError naming the offending layer.
ModelGraph parse_model(const std::string& json_text);

/// Parse variant that reports problems as diagnostics instead of throwing.
/// graph is set only when no error-severity diagnostic was produced.
struct ParseOutcome {
    std::optional<ModelGraph> graph;
    std::vector<Diagnostic> diagnostics;
};
ParseOutcome parse_model_diagnostics(const std::string& json_text);

/// Canonical serialization; parse -> serialize -> parse is a fixed point.
std::string serialize_model(const ModelGraph& graph);

ModelGraph load_model_file(const std::string& path);

/// Re-runs the semantic checks on an already constructed graph.
/// Empty result means the model is runnable.
std::vector<Diagnostic> validate_model(const ModelGraph& graph);

enum class DataFormat { Csv, Json };

/// Loads a batch and checks it against the graph's input shapes. Rank-4 JSON
/// arrays are permuted to the internal channels-first layout when
/// channels_first is false.
Dataset load_dataset(const std::string& path, DataFormat format, bool channels_first,
                     const ModelGraph& graph);
Dataset parse_dataset(const std::string& text, DataFormat format, bool channels_first,
                      const ModelGraph& graph);

/// JSON object form of a dataset (channels-first, as stored internally).
std::string serialize_dataset(const Dataset& data);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace nnattr
