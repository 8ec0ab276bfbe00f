#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nnattr/activations.hpp"
#include "nnattr/kernels.hpp"
#include "nnattr/tensor.hpp"

namespace nnattr {

enum class LayerKind { Input, Dense, Conv2D, AvgPool2D, MaxPool2D, Flatten, Concatenate };

inline std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Input: return "Input";
        case LayerKind::Dense: return "Dense";
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::AvgPool2D: return "AvgPool2D";
        case LayerKind::MaxPool2D: return "MaxPool2D";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Concatenate: return "Concatenate";
    }
    return "?";
}

/// One node of the model graph. Weights are kept in double and cast to the
/// working precision when a forward pass is run.
struct LayerSpec {
    std::string id;
    LayerKind kind = LayerKind::Input;
    std::vector<std::string> inbound;
    Activation activation = Activation::Linear;

    // Dense: weight [out x in]; Conv2D: kernel [out x in x kH x kW].
    Tensor<double> weight;
    Tensor<double> bias; // empty when absent
    std::array<std::int64_t, 2> kernel_size{1, 1};
    std::array<std::int64_t, 2> stride{1, 1};
    Padding padding = Padding::Valid;
    std::int64_t concat_axis = 0;

    Shape input_shape;  // Input layers: declared per-instance shape
    Shape output_shape; // inferred per-instance shape

    bool has_bias() const { return !bias.data.empty(); }
    bool is_linear_kind() const { return kind == LayerKind::Dense || kind == LayerKind::Conv2D; }
};

struct Diagnostic {
    enum class Severity { Warning, Error };
    Severity severity = Severity::Error;
    std::string layer_id;
    std::string message;
};

/// Per-axis display names of one layer, e.g. {{"X1","X2"}} for tabular or
/// {{"C1",...},{"H1",...},{"W1",...}} for channels-first images.
using AxisNames = std::vector<std::vector<std::string>>;

/// Validated DAG of layers in topological order.
struct ModelGraph {
    std::vector<LayerSpec> layers; // topological order
    std::vector<std::string> input_ids;
    std::vector<std::string> output_ids;
    std::vector<AxisNames> input_names;               // one entry per input layer
    std::vector<std::vector<std::string>> output_names; // one entry per output layer

    std::map<std::string, std::size_t> index_of; // layer id -> position in layers

    const LayerSpec& layer(const std::string& id) const { return layers[index_of.at(id)]; }
    LayerSpec& layer(const std::string& id) { return layers[index_of.at(id)]; }

    std::vector<Shape> input_dims() const {
        std::vector<Shape> dims;
        for (const auto& id : input_ids) dims.push_back(layer(id).input_shape);
        return dims;
    }
    std::vector<Shape> output_dims() const {
        std::vector<Shape> dims;
        for (const auto& id : output_ids) dims.push_back(layer(id).output_shape);
        return dims;
    }

    /// Graph copy with every MaxPool2D turned into an AvgPool2D of the same
    /// geometry (the winner_takes_all = false treatment).
    ModelGraph with_maxpool_as_avgpool() const {
        ModelGraph g = *this;
        for (auto& l : g.layers) {
            if (l.kind == LayerKind::MaxPool2D) l.kind = LayerKind::AvgPool2D;
        }
        return g;
    }
};

/// Input batch: one tensor per input layer, leading batch axis.
struct Dataset {
    std::vector<std::string> input_ids;
    std::vector<Tensor<double>> tensors; // [batch x input_dims...]
    std::vector<std::string> instance_ids;

    std::int64_t batch_size() const { return tensors.empty() ? 0 : tensors[0].shape[0]; }

    const Tensor<double>& tensor_for(const std::string& id) const {
        for (std::size_t i = 0; i < input_ids.size(); ++i) {
            if (input_ids[i] == id) return tensors[i];
        }
        throw ValueError("dataset has no tensor for input layer \"" + id + "\"");
    }
};

} // namespace nnattr
