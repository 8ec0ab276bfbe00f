#include "nnattr/model_io.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nnattr {

using nlohmann::ordered_json;

namespace {

LayerKind kind_from_string(const std::string& s, const std::string& layer_id) {
    if (s == "Input") return LayerKind::Input;
    if (s == "Dense") return LayerKind::Dense;
    if (s == "Conv2D") return LayerKind::Conv2D;
    if (s == "AvgPool2D") return LayerKind::AvgPool2D;
    if (s == "MaxPool2D") return LayerKind::MaxPool2D;
    if (s == "Flatten") return LayerKind::Flatten;
    if (s == "Concatenate") return LayerKind::Concatenate;
    if (s == "Add")
        throw ParseError("layer \"" + layer_id + "\": residual Add merges are not supported; only Concatenate is");
    throw ParseError("layer \"" + layer_id + "\": unknown layer kind \"" + s + "\"");
}

void collect_numbers(const ordered_json& node, std::vector<double>& out, Shape& shape,
                     std::size_t depth, const std::string& what) {
    if (node.is_array()) {
        if (depth == shape.size()) shape.push_back(static_cast<std::int64_t>(node.size()));
        if (static_cast<std::int64_t>(node.size()) != shape[depth]) {
            throw ParseError(what + ": ragged nested array");
        }
        for (const auto& child : node) collect_numbers(child, out, shape, depth + 1, what);
    } else if (node.is_number()) {
        if (depth != shape.size()) throw ParseError(what + ": inconsistent nesting depth");
        out.push_back(node.get<double>());
    } else {
        throw ParseError(what + ": expected number, got " + std::string(node.type_name()));
    }
}

Tensor<double> tensor_from_json(const ordered_json& node, const std::string& what) {
    std::vector<double> values;
    Shape shape;
    collect_numbers(node, values, shape, 0, what);
    if (shape.empty()) throw ParseError(what + ": scalar where array expected");
    for (auto d : shape) {
        if (d == 0) throw ParseError(what + ": empty dimension");
    }
    return Tensor<double>(shape, std::move(values));
}

ordered_json tensor_to_json(const Tensor<double>& t) {
    // nested arrays, row-major
    std::function<ordered_json(std::size_t, std::int64_t&)> build =
        [&](std::size_t axis, std::int64_t& pos) -> ordered_json {
        ordered_json arr = ordered_json::array();
        if (axis + 1 == t.shape.size()) {
            for (std::int64_t i = 0; i < t.shape[axis]; ++i) arr.push_back(t.data[pos++]);
        } else {
            for (std::int64_t i = 0; i < t.shape[axis]; ++i) arr.push_back(build(axis + 1, pos));
        }
        return arr;
    };
    std::int64_t pos = 0;
    return build(0, pos);
}

void check_keys(const ordered_json& obj, const std::set<std::string>& allowed, const std::string& what) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ParseError(what + ": unknown field \"" + it.key() + "\"");
        }
    }
}

std::array<std::int64_t, 2> pair_from_json(const ordered_json& node, const std::string& what) {
    if (!node.is_array() || node.size() != 2 || !node[0].is_number_integer() || !node[1].is_number_integer()) {
        throw ParseError(what + ": expected [h, w] integer pair");
    }
    return {node[0].get<std::int64_t>(), node[1].get<std::int64_t>()};
}

LayerSpec parse_layer(const ordered_json& node) {
    if (!node.is_object()) throw ParseError("layer entry must be an object");
    if (!node.contains("id") || !node["id"].is_string() || node["id"].get<std::string>().empty()) {
        throw ParseError("layer without a non-empty string \"id\"");
    }
    LayerSpec layer;
    layer.id = node["id"].get<std::string>();
    if (!node.contains("kind") || !node["kind"].is_string()) {
        throw ParseError("layer \"" + layer.id + "\": missing \"kind\"");
    }
    layer.kind = kind_from_string(node["kind"].get<std::string>(), layer.id);

    const std::string ctx = "layer \"" + layer.id + "\"";
    auto get_inbound = [&]() {
        if (!node.contains("inbound") || !node["inbound"].is_array()) {
            throw ParseError(ctx + ": missing \"inbound\" list");
        }
        for (const auto& e : node["inbound"]) {
            if (!e.is_string()) throw ParseError(ctx + ": inbound entries must be layer ids");
            layer.inbound.push_back(e.get<std::string>());
        }
    };
    auto get_activation = [&]() {
        if (node.contains("activation")) {
            if (!node["activation"].is_string()) throw ParseError(ctx + ": activation must be a string");
            layer.activation = activation_from_string(node["activation"].get<std::string>());
        }
    };

    switch (layer.kind) {
        case LayerKind::Input: {
            check_keys(node, {"id", "kind", "shape"}, ctx);
            if (!node.contains("shape") || !node["shape"].is_array() || node["shape"].empty()) {
                throw ParseError(ctx + ": Input needs a non-empty \"shape\"");
            }
            for (const auto& d : node["shape"]) {
                if (!d.is_number_integer() || d.get<std::int64_t>() <= 0) {
                    throw ParseError(ctx + ": shape entries must be positive integers");
                }
                layer.input_shape.push_back(d.get<std::int64_t>());
            }
            break;
        }
        case LayerKind::Dense: {
            check_keys(node, {"id", "kind", "inbound", "weight", "bias", "activation"}, ctx);
            get_inbound();
            get_activation();
            if (!node.contains("weight")) throw ParseError(ctx + ": Dense needs \"weight\"");
            layer.weight = tensor_from_json(node["weight"], ctx + " weight");
            if (layer.weight.rank() != 2) throw ShapeError(ctx + ": Dense weight must be [out x in]");
            if (node.contains("bias")) layer.bias = tensor_from_json(node["bias"], ctx + " bias");
            break;
        }
        case LayerKind::Conv2D: {
            check_keys(node, {"id", "kind", "inbound", "kernel", "bias", "stride", "padding", "activation"}, ctx);
            get_inbound();
            get_activation();
            if (!node.contains("kernel")) throw ParseError(ctx + ": Conv2D needs \"kernel\"");
            layer.weight = tensor_from_json(node["kernel"], ctx + " kernel");
            if (layer.weight.rank() != 4) throw ShapeError(ctx + ": Conv2D kernel must be [out x in x kH x kW]");
            layer.kernel_size = {layer.weight.shape[2], layer.weight.shape[3]};
            if (node.contains("bias")) layer.bias = tensor_from_json(node["bias"], ctx + " bias");
            if (node.contains("stride")) layer.stride = pair_from_json(node["stride"], ctx + " stride");
            if (node.contains("padding")) {
                const std::string p = node["padding"].get<std::string>();
                if (p == "valid") layer.padding = Padding::Valid;
                else if (p == "same") layer.padding = Padding::Same;
                else throw ParseError(ctx + ": padding must be \"valid\" or \"same\"");
            }
            break;
        }
        case LayerKind::AvgPool2D:
        case LayerKind::MaxPool2D: {
            check_keys(node, {"id", "kind", "inbound", "kernel", "stride"}, ctx);
            get_inbound();
            if (!node.contains("kernel")) throw ParseError(ctx + ": pooling needs \"kernel\" [h, w]");
            layer.kernel_size = pair_from_json(node["kernel"], ctx + " kernel");
            layer.stride = node.contains("stride") ? pair_from_json(node["stride"], ctx + " stride")
                                                   : layer.kernel_size;
            break;
        }
        case LayerKind::Flatten: {
            check_keys(node, {"id", "kind", "inbound"}, ctx);
            get_inbound();
            break;
        }
        case LayerKind::Concatenate: {
            check_keys(node, {"id", "kind", "inbound", "axis"}, ctx);
            get_inbound();
            if (node.contains("axis")) {
                if (!node["axis"].is_number_integer()) throw ParseError(ctx + ": axis must be an integer");
                layer.concat_axis = node["axis"].get<std::int64_t>();
            }
            break;
        }
    }
    if (layer.stride[0] <= 0 || layer.stride[1] <= 0) throw ParseError(ctx + ": stride must be positive");
    if (layer.kernel_size[0] <= 0 || layer.kernel_size[1] <= 0) throw ParseError(ctx + ": kernel size must be positive");
    return layer;
}

std::vector<std::string> default_axis_names(char prefix, std::int64_t n) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 1; i <= n; ++i) names.push_back(std::string(1, prefix) + std::to_string(i));
    return names;
}

AxisNames default_input_names(const Shape& shape) {
    if (shape.size() == 3) {
        return {default_axis_names('C', shape[0]), default_axis_names('H', shape[1]),
                default_axis_names('W', shape[2])};
    }
    AxisNames names;
    for (std::size_t a = 0; a < shape.size(); ++a) names.push_back(default_axis_names('X', shape[a]));
    return names;
}

void error(std::vector<Diagnostic>& diags, const std::string& id, const std::string& msg) {
    diags.push_back({Diagnostic::Severity::Error, id, msg});
}
void warning(std::vector<Diagnostic>& diags, const std::string& id, const std::string& msg) {
    diags.push_back({Diagnostic::Severity::Warning, id, msg});
}

/// Shape inference plus the semantic layer checks. Fills output_shape fields.
void infer_and_check(ModelGraph& g, std::vector<Diagnostic>& diags) {
    for (auto& layer : g.layers) {
        const std::string& id = layer.id;
        auto in_shape = [&](std::size_t i) -> const Shape& { return g.layer(layer.inbound[i]).output_shape; };
        auto inputs_ready = [&]() {
            for (const auto& pred : layer.inbound) {
                if (g.layer(pred).output_shape.empty()) return false;
            }
            return true;
        };
        if (layer.kind != LayerKind::Input && !inputs_ready()) continue; // upstream already failed

        switch (layer.kind) {
            case LayerKind::Input:
                layer.output_shape = layer.input_shape;
                if (layer.input_shape.size() != 1 && layer.input_shape.size() != 3) {
                    error(diags, id, "Input shape must be rank 1 (features) or rank 3 (channels x height x width)");
                }
                break;
            case LayerKind::Dense: {
                const Shape& in = in_shape(0);
                if (in.size() != 1) {
                    error(diags, id, "Dense expects a rank-1 input, got " + shape_str(in) + " (add a Flatten)");
                    break;
                }
                if (layer.weight.shape[1] != in[0]) {
                    error(diags, id, "Dense weight " + shape_str(layer.weight.shape) +
                                         " does not match input shape " + shape_str(in));
                    break;
                }
                if (layer.has_bias() && (layer.bias.rank() != 1 || layer.bias.shape[0] != layer.weight.shape[0])) {
                    error(diags, id, "bias length " + shape_str(layer.bias.shape) + " does not match " +
                                         std::to_string(layer.weight.shape[0]) + " output features");
                    break;
                }
                layer.output_shape = {layer.weight.shape[0]};
                break;
            }
            case LayerKind::Conv2D: {
                const Shape& in = in_shape(0);
                if (in.size() != 3) {
                    error(diags, id, "Conv2D expects a rank-3 input, got " + shape_str(in));
                    break;
                }
                if (layer.weight.shape[1] != in[0]) {
                    error(diags, id, "Conv2D kernel " + shape_str(layer.weight.shape) +
                                         " does not match " + std::to_string(in[0]) + " input channels");
                    break;
                }
                if (layer.has_bias() && (layer.bias.rank() != 1 || layer.bias.shape[0] != layer.weight.shape[0])) {
                    error(diags, id, "bias length " + shape_str(layer.bias.shape) + " does not match " +
                                         std::to_string(layer.weight.shape[0]) + " filters");
                    break;
                }
                try {
                    std::int64_t oh = 0, ow = 0, pad = 0;
                    detail::conv_out_size(in[1], layer.weight.shape[2], layer.stride[0], layer.padding, oh, pad);
                    detail::conv_out_size(in[2], layer.weight.shape[3], layer.stride[1], layer.padding, ow, pad);
                    layer.output_shape = {layer.weight.shape[0], oh, ow};
                } catch (const ShapeError& e) {
                    error(diags, id, e.what());
                }
                break;
            }
            case LayerKind::AvgPool2D:
            case LayerKind::MaxPool2D: {
                const Shape& in = in_shape(0);
                if (in.size() != 3) {
                    error(diags, id, "pooling expects a rank-3 input, got " + shape_str(in));
                    break;
                }
                if (layer.kernel_size[0] > in[1] || layer.kernel_size[1] > in[2]) {
                    error(diags, id, "pooling window " + std::to_string(layer.kernel_size[0]) + "x" +
                                         std::to_string(layer.kernel_size[1]) + " exceeds input " + shape_str(in));
                    break;
                }
                std::int64_t oh = 0, ow = 0, pad = 0;
                detail::conv_out_size(in[1], layer.kernel_size[0], layer.stride[0], Padding::Valid, oh, pad);
                detail::conv_out_size(in[2], layer.kernel_size[1], layer.stride[1], Padding::Valid, ow, pad);
                layer.output_shape = {in[0], oh, ow};
                break;
            }
            case LayerKind::Flatten:
                layer.output_shape = {numel(in_shape(0))};
                break;
            case LayerKind::Concatenate: {
                const Shape& first = in_shape(0);
                const auto axis = layer.concat_axis;
                if (axis < 0 || axis >= static_cast<std::int64_t>(first.size())) {
                    error(diags, id, "concat axis " + std::to_string(axis) + " out of range for rank " +
                                         std::to_string(first.size()));
                    break;
                }
                Shape out = first;
                bool ok = true;
                for (std::size_t i = 1; i < layer.inbound.size(); ++i) {
                    const Shape& s = in_shape(i);
                    if (s.size() != first.size()) {
                        error(diags, id, "concat inputs have different ranks");
                        ok = false;
                        break;
                    }
                    for (std::size_t a = 0; a < s.size(); ++a) {
                        if (static_cast<std::int64_t>(a) == axis) continue;
                        if (s[a] != first[a]) {
                            error(diags, id, "concat inputs disagree on non-concat axis " + std::to_string(a));
                            ok = false;
                            break;
                        }
                    }
                    if (!ok) break;
                    out[static_cast<std::size_t>(axis)] += s[static_cast<std::size_t>(axis)];
                }
                if (ok) layer.output_shape = out;
                break;
            }
        }

        if (layer.activation == Activation::Softmax &&
            std::find(g.output_ids.begin(), g.output_ids.end(), id) == g.output_ids.end()) {
            warning(diags, id, "softmax on a hidden layer; attribution rules expect it only on outputs");
        }
    }

    for (const auto& out_id : g.output_ids) {
        const auto& layer = g.layer(out_id);
        if (!layer.output_shape.empty() && layer.output_shape.size() != 1) {
            error(diags, out_id, "output layer must produce a rank-1 shape, got " + shape_str(layer.output_shape));
        }
    }
}

ParseOutcome parse_document(const std::string& json_text) {
    ParseOutcome outcome;
    auto& diags = outcome.diagnostics;

    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("model document must be a JSON object");
    check_keys(doc, {"format_version", "layers", "inputs", "outputs", "input_names", "output_names"}, "model");
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer() ||
        doc["format_version"].get<int>() != 1) {
        throw ParseError("missing or unsupported format_version (expected 1)");
    }
    for (const char* key : {"layers", "inputs", "outputs"}) {
        if (!doc.contains(key) || !doc[key].is_array()) throw ParseError(std::string("missing \"") + key + "\" array");
    }
    if (doc["layers"].empty()) throw ParseError("model has no layers");

    ModelGraph g;
    std::vector<LayerSpec> parsed;
    for (const auto& node : doc["layers"]) parsed.push_back(parse_layer(node));

    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (pos.count(parsed[i].id)) throw ParseError("duplicate layer id \"" + parsed[i].id + "\"");
        pos[parsed[i].id] = i;
    }

    for (const auto& e : doc["inputs"]) g.input_ids.push_back(e.get<std::string>());
    for (const auto& e : doc["outputs"]) g.output_ids.push_back(e.get<std::string>());
    if (g.input_ids.empty()) throw ParseError("model declares no inputs");
    if (g.output_ids.empty()) throw ParseError("model declares no outputs");

    for (const auto& id : g.input_ids) {
        if (!pos.count(id)) throw ParseError("declared input \"" + id + "\" does not exist");
        if (parsed[pos[id]].kind != LayerKind::Input)
            throw ParseError("declared input \"" + id + "\" is not an Input layer");
    }
    for (const auto& layer : parsed) {
        if (layer.kind == LayerKind::Input &&
            std::find(g.input_ids.begin(), g.input_ids.end(), layer.id) == g.input_ids.end()) {
            throw ParseError("Input layer \"" + layer.id + "\" is not listed in \"inputs\"");
        }
    }
    for (const auto& id : g.output_ids) {
        if (!pos.count(id)) throw ParseError("declared output \"" + id + "\" does not exist");
    }

    // arity and edge checks
    for (const auto& layer : parsed) {
        const std::string ctx = "layer \"" + layer.id + "\"";
        if (layer.kind == LayerKind::Input) {
            if (!layer.inbound.empty()) throw ParseError(ctx + ": Input layers take no inbound edges");
            continue;
        }
        if (layer.kind == LayerKind::Concatenate) {
            if (layer.inbound.size() < 2) throw ParseError(ctx + ": Concatenate needs at least 2 inbound layers");
        } else if (layer.inbound.size() != 1) {
            throw ParseError(ctx + ": expects exactly one inbound layer");
        }
        for (const auto& pred : layer.inbound) {
            if (!pos.count(pred)) throw ParseError(ctx + ": inbound id \"" + pred + "\" does not exist");
        }
    }

    // Kahn topological sort; stable w.r.t. document order.
    std::vector<std::size_t> indegree(parsed.size(), 0);
    std::vector<std::vector<std::size_t>> succ(parsed.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        for (const auto& pred : parsed[i].inbound) {
            succ[pos[pred]].push_back(i);
            ++indegree[i];
        }
    }
    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (indegree[i] == 0) ready.push_back(i);
    }
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        const std::size_t i = ready.front();
        ready.pop_front();
        order.push_back(i);
        for (auto s : succ[i]) {
            if (--indegree[s] == 0) ready.push_back(s);
        }
    }
    if (order.size() != parsed.size()) {
        std::string cyc;
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            if (indegree[i] > 0) cyc += (cyc.empty() ? "" : ", ") + parsed[i].id;
        }
        throw ParseError("model graph contains a cycle through: " + cyc);
    }
    for (auto i : order) g.layers.push_back(std::move(parsed[i]));
    for (std::size_t i = 0; i < g.layers.size(); ++i) g.index_of[g.layers[i].id] = i;

    infer_and_check(g, diags);

    // names: declared or defaulted
    if (doc.contains("input_names")) {
        const auto& names = doc["input_names"];
        if (!names.is_array() || names.size() != g.input_ids.size()) {
            throw ParseError("input_names must list one entry per input layer");
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            AxisNames axes;
            if (!names[i].is_array()) throw ParseError("input_names entries must be arrays of axis-name arrays");
            for (const auto& axis : names[i]) {
                std::vector<std::string> axis_names;
                if (!axis.is_array()) throw ParseError("input_names axes must be arrays of strings");
                for (const auto& n : axis) axis_names.push_back(n.get<std::string>());
                axes.push_back(std::move(axis_names));
            }
            const Shape& shape = g.layer(g.input_ids[i]).input_shape;
            if (axes.size() != shape.size()) {
                throw ParseError("input_names for \"" + g.input_ids[i] + "\" has " + std::to_string(axes.size()) +
                                 " axes, input has rank " + std::to_string(shape.size()));
            }
            for (std::size_t a = 0; a < axes.size(); ++a) {
                if (static_cast<std::int64_t>(axes[a].size()) != shape[a]) {
                    throw ParseError("input_names for \"" + g.input_ids[i] + "\" axis " + std::to_string(a) +
                                     " has " + std::to_string(axes[a].size()) + " names, expected " +
                                     std::to_string(shape[a]));
                }
            }
            g.input_names.push_back(std::move(axes));
        }
    } else {
        for (const auto& id : g.input_ids) g.input_names.push_back(default_input_names(g.layer(id).input_shape));
    }

    if (doc.contains("output_names")) {
        const auto& names = doc["output_names"];
        if (!names.is_array() || names.size() != g.output_ids.size()) {
            throw ParseError("output_names must list one entry per output layer");
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            std::vector<std::string> entry;
            if (!names[i].is_array()) throw ParseError("output_names entries must be arrays of strings");
            for (const auto& n : names[i]) entry.push_back(n.get<std::string>());
            const Shape& shape = g.layer(g.output_ids[i]).output_shape;
            if (!shape.empty() && static_cast<std::int64_t>(entry.size()) != shape[0]) {
                throw ParseError("output_names for \"" + g.output_ids[i] + "\" has " + std::to_string(entry.size()) +
                                 " names, layer has " + std::to_string(shape[0]) + " nodes");
            }
            g.output_names.push_back(std::move(entry));
        }
    } else {
        for (const auto& id : g.output_ids) {
            const Shape& shape = g.layer(id).output_shape;
            g.output_names.push_back(default_axis_names('Y', shape.empty() ? 0 : shape[0]));
        }
    }

    bool has_error = false;
    for (const auto& d : diags) has_error |= d.severity == Diagnostic::Severity::Error;
    if (!has_error) outcome.graph = std::move(g);
    return outcome;
}

} // namespace

ParseOutcome parse_model_diagnostics(const std::string& json_text) {
    return parse_document(json_text);
}

ModelGraph parse_model(const std::string& json_text) {
    ParseOutcome outcome = parse_document(json_text);
    for (const auto& d : outcome.diagnostics) {
        if (d.severity == Diagnostic::Severity::Error) {
            throw ShapeError("layer \"" + d.layer_id + "\": " + d.message);
        }
    }
    return std::move(*outcome.graph);
}

std::vector<Diagnostic> validate_model(const ModelGraph& graph) {
    std::vector<Diagnostic> diags;
    ModelGraph copy = graph;
    for (auto& l : copy.layers) l.output_shape.clear();
    infer_and_check(copy, diags);
    // re-check inferred shapes agree with the stored ones
    for (const auto& l : copy.layers) {
        if (!l.output_shape.empty() && l.output_shape != graph.layer(l.id).output_shape) {
            diags.push_back({Diagnostic::Severity::Error, l.id, "stored output shape disagrees with inference"});
        }
    }
    return diags;
}

std::string serialize_model(const ModelGraph& graph) {
    ordered_json doc;
    doc["format_version"] = 1;
    doc["inputs"] = graph.input_ids;
    doc["outputs"] = graph.output_ids;
    doc["input_names"] = graph.input_names;
    doc["output_names"] = graph.output_names;
    ordered_json layers = ordered_json::array();
    for (const auto& l : graph.layers) {
        ordered_json node;
        node["id"] = l.id;
        node["kind"] = to_string(l.kind);
        switch (l.kind) {
            case LayerKind::Input:
                node["shape"] = l.input_shape;
                break;
            case LayerKind::Dense:
                node["inbound"] = l.inbound;
                node["weight"] = tensor_to_json(l.weight);
                if (l.has_bias()) node["bias"] = tensor_to_json(l.bias);
                node["activation"] = to_string(l.activation);
                break;
            case LayerKind::Conv2D:
                node["inbound"] = l.inbound;
                node["kernel"] = tensor_to_json(l.weight);
                if (l.has_bias()) node["bias"] = tensor_to_json(l.bias);
                node["stride"] = l.stride;
                node["padding"] = l.padding == Padding::Valid ? "valid" : "same";
                node["activation"] = to_string(l.activation);
                break;
            case LayerKind::AvgPool2D:
            case LayerKind::MaxPool2D:
                node["inbound"] = l.inbound;
                node["kernel"] = l.kernel_size;
                node["stride"] = l.stride;
                break;
            case LayerKind::Flatten:
                node["inbound"] = l.inbound;
                break;
            case LayerKind::Concatenate:
                node["inbound"] = l.inbound;
                node["axis"] = l.concat_axis;
                break;
        }
        layers.push_back(std::move(node));
    }
    doc["layers"] = std::move(layers);
    return doc.dump(2) + "\n";
}

std::string serialize_dataset(const Dataset& data) {
    ordered_json doc;
    doc["ids"] = data.instance_ids;
    for (std::size_t i = 0; i < data.input_ids.size(); ++i) {
        doc[data.input_ids[i]] = tensor_to_json(data.tensors[i]);
    }
    return doc.dump() + "\n";
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read \"" + path + "\"");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write \"" + path + "\"");
    out << content;
}

ModelGraph load_model_file(const std::string& path) {
    return parse_model(read_text_file(path));
}

namespace {

Dataset dataset_from_csv(const std::string& text, const ModelGraph& graph) {
    if (graph.input_ids.size() != 1) {
        throw ParseError("CSV data requires a single-input model; this model has " +
                         std::to_string(graph.input_ids.size()) + " inputs");
    }
    const Shape& in_shape = graph.layer(graph.input_ids[0]).input_shape;
    if (in_shape.size() != 1) {
        throw ParseError("CSV data fits rank-1 inputs only; input expects " + shape_str(in_shape));
    }

    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::istringstream stream(text);
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw ParseError("no instances: data file is empty");

    const auto& header = rows[0];
    const bool has_id = !header.empty() && header[0] == "id";
    const std::size_t first_col = has_id ? 1 : 0;
    const std::int64_t width = static_cast<std::int64_t>(header.size() - first_col);
    if (width != in_shape[0]) {
        throw ShapeError("CSV has " + std::to_string(width) + " feature columns, model input expects " +
                         std::to_string(in_shape[0]));
    }
    if (rows.size() == 1) throw ParseError("no instances: CSV has a header but no data rows");

    Dataset ds;
    ds.input_ids = graph.input_ids;
    const std::int64_t batch = static_cast<std::int64_t>(rows.size() - 1);
    Tensor<double> t({batch, in_shape[0]});
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw ParseError("CSV row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                             " cells, header has " + std::to_string(header.size()));
        }
        if (has_id) ds.instance_ids.push_back(row[0]);
        for (std::size_t c = first_col; c < row.size(); ++c) {
            try {
                std::size_t used = 0;
                const double v = std::stod(row[c], &used);
                if (used != row[c].size()) throw std::invalid_argument(row[c]);
                t.data[(r - 1) * in_shape[0] + (c - first_col)] = v;
            } catch (const std::exception&) {
                throw ParseError("CSV row " + std::to_string(r) + ", column " + std::to_string(c + 1) +
                                 ": non-numeric cell \"" + row[c] + "\"");
            }
        }
    }
    if (!has_id) {
        for (std::int64_t i = 1; i <= batch; ++i) ds.instance_ids.push_back(std::to_string(i));
    }
    ds.tensors.push_back(std::move(t));
    return ds;
}

Tensor<double> ingest_array(const ordered_json& node, bool channels_first, const Shape& want,
                            const std::string& what) {
    Tensor<double> t = tensor_from_json(node, what);
    if (t.rank() == 4 && !channels_first) t = channels_last_to_first(t);
    if (t.rank() != static_cast<int>(want.size()) + 1) {
        throw ShapeError(what + ": batch array rank " + std::to_string(t.rank()) + " does not match input rank " +
                         std::to_string(want.size()) + " + batch axis");
    }
    for (std::size_t a = 0; a < want.size(); ++a) {
        if (t.shape[a + 1] != want[a]) {
            throw ShapeError(what + ": instance shape " + shape_str(Shape(t.shape.begin() + 1, t.shape.end())) +
                             " does not match model input " + shape_str(want));
        }
    }
    return t;
}

Dataset dataset_from_json(const std::string& text, bool channels_first, const ModelGraph& graph) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON data: ") + e.what());
    }

    Dataset ds;
    ds.input_ids = graph.input_ids;
    if (doc.is_array()) {
        if (doc.empty()) throw ParseError("no instances: data array is empty");
        if (graph.input_ids.size() != 1) {
            throw ParseError("bare-array data requires a single-input model; pass an object keyed by input id");
        }
        ds.tensors.push_back(ingest_array(doc, channels_first, graph.layer(graph.input_ids[0]).input_shape, "data"));
    } else if (doc.is_object()) {
        check_keys(doc, [&] {
            std::set<std::string> keys{"ids"};
            for (const auto& id : graph.input_ids) keys.insert(id);
            return keys;
        }(), "data");
        for (const auto& id : graph.input_ids) {
            if (!doc.contains(id)) throw ParseError("data object is missing input layer \"" + id + "\"");
            ds.tensors.push_back(ingest_array(doc[id], channels_first, graph.layer(id).input_shape,
                                              "data[\"" + id + "\"]"));
        }
        if (doc.contains("ids")) {
            for (const auto& e : doc["ids"]) ds.instance_ids.push_back(e.get<std::string>());
        }
    } else {
        throw ParseError("data document must be an array or an object");
    }

    const std::int64_t batch = ds.tensors[0].shape[0];
    if (batch == 0) throw ParseError("no instances: data batch is empty");
    for (std::size_t i = 1; i < ds.tensors.size(); ++i) {
        if (ds.tensors[i].shape[0] != batch) {
            throw ShapeError("batch sizes disagree across input layers: " + std::to_string(batch) + " vs " +
                             std::to_string(ds.tensors[i].shape[0]));
        }
    }
    if (ds.instance_ids.empty()) {
        for (std::int64_t i = 1; i <= batch; ++i) ds.instance_ids.push_back(std::to_string(i));
    } else if (static_cast<std::int64_t>(ds.instance_ids.size()) != batch) {
        throw ParseError("ids list length does not match batch size");
    }
    return ds;
}

} // namespace

Dataset parse_dataset(const std::string& text, DataFormat format, bool channels_first,
                      const ModelGraph& graph) {
    if (text.empty()) throw ParseError("no instances: data file is empty");
    return format == DataFormat::Csv ? dataset_from_csv(text, graph)
                                     : dataset_from_json(text, channels_first, graph);
}

Dataset load_dataset(const std::string& path, DataFormat format, bool channels_first,
                     const ModelGraph& graph) {
    return parse_dataset(read_text_file(path), format, channels_first, graph);
}

} // namespace nnattr
