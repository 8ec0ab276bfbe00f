// Command-line front end: validate | attribute | plot | check.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nnattr/attribution.hpp"
#include "nnattr/check.hpp"
#include "nnattr/model_io.hpp"
#include "nnattr/oracle.hpp"
#include "nnattr/results.hpp"
#include "nnattr/svg.hpp"

namespace {

using namespace nnattr;

int env_threads() {
    const char* v = std::getenv("ATTRIB_THREADS");
    if (!v) return 1;
    try {
        return std::max(1, std::stoi(v));
    } catch (const std::exception&) {
        return 1;
    }
}

DataFormat format_for(const std::string& path, const std::string& override_fmt) {
    if (override_fmt == "csv") return DataFormat::Csv;
    if (override_fmt == "json") return DataFormat::Json;
    if (!override_fmt.empty()) throw ValueError("unknown data format \"" + override_fmt + "\"");
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".csv") return DataFormat::Csv;
    return DataFormat::Json;
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

/// "1,3" (1-based node indices on the sole output layer) or "layer:1,layer2:3".
OutputSelection parse_output_idx(const std::string& spec, const ModelGraph& g) {
    OutputSelection sel;
    if (spec.empty()) return sel;
    for (const auto& tok : split_list(spec)) {
        OutputUnit unit;
        const auto colon = tok.find(':');
        std::string idx_part = tok;
        if (colon != std::string::npos) {
            unit.layer_id = tok.substr(0, colon);
            idx_part = tok.substr(colon + 1);
        } else {
            if (g.output_ids.size() != 1) {
                throw ValueError("model has several output layers; use --output-idx layer:index");
            }
            unit.layer_id = g.output_ids[0];
        }
        try {
            unit.node = std::stoll(idx_part) - 1; // CLI indices are 1-based
        } catch (const std::exception&) {
            throw ValueError("bad --output-idx entry \"" + tok + "\"");
        }
        sel.units.push_back(std::move(unit));
    }
    return sel;
}

LayerKind layer_kind_from(const std::string& s) {
    if (s == "Dense") return LayerKind::Dense;
    if (s == "Conv2D") return LayerKind::Conv2D;
    if (s == "AvgPool2D") return LayerKind::AvgPool2D;
    if (s == "MaxPool2D") return LayerKind::MaxPool2D;
    throw ValueError("unknown layer kind \"" + s + "\" in rule map (use Dense, Conv2D, AvgPool2D or MaxPool2D)");
}

std::vector<std::int64_t> parse_index_list(const std::string& s) {
    std::vector<std::int64_t> out;
    for (const auto& tok : split_list(s)) {
        try {
            out.push_back(std::stoll(tok) - 1);
        } catch (const std::exception&) {
            throw ValueError("bad index \"" + tok + "\"");
        }
    }
    return out;
}

int cmd_validate(const std::string& model_path) {
    std::string text;
    try {
        text = read_text_file(model_path);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::vector<Diagnostic> diags;
    try {
        ParseOutcome outcome = parse_model_diagnostics(text);
        diags = std::move(outcome.diagnostics);
        if (outcome.graph) {
            auto more = validate_model(*outcome.graph);
            diags.insert(diags.end(), more.begin(), more.end());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    bool has_error = false;
    for (const auto& d : diags) {
        const bool err = d.severity == Diagnostic::Severity::Error;
        has_error |= err;
        std::cerr << (err ? "error" : "warning") << " [" << d.layer_id << "]: " << d.message << "\n";
    }
    if (!has_error) std::cerr << "model ok\n";
    return has_error ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature attribution for small neural networks"};
    app.require_subcommand(1);

    // validate
    auto* validate = app.add_subcommand("validate", "parse a model file and report diagnostics");
    std::string v_model;
    validate->add_option("--model", v_model, "model JSON file")->required();

    // attribute
    auto* attribute = app.add_subcommand("attribute", "run an attribution method over a data batch");
    std::string a_model, a_data, a_data_format, a_method = "gradient", a_output_idx, a_xref;
    std::string a_records = "records.csv", a_array, a_deeplift_rule = "rescale", a_dtype = "float";
    std::vector<std::string> a_rule_names, a_rule_params;
    bool a_times_input = false, a_channels_first = true, a_ignore_last_act = true, a_wta = true;
    int a_n = 50;
    double a_noise = 0.1;
    std::uint64_t a_seed = 1;
    attribute->add_option("--model", a_model, "model JSON file")->required();
    attribute->add_option("--data", a_data, "input batch (CSV or JSON)");
    attribute->add_option("--data-format", a_data_format, "force data format: csv | json");
    attribute->add_option("--method", a_method,
                          "gradient | smoothgrad | lrp | deeplift | connection-weights");
    attribute->add_flag("--times-input", a_times_input, "multiply relevances by the input");
    attribute->add_option("--n", a_n, "SmoothGrad sample count");
    attribute->add_option("--noise-level", a_noise, "SmoothGrad noise level (fraction of input range)");
    attribute->add_option("--seed", a_seed, "RNG seed for SmoothGrad");
    attribute->add_option("--rule-name", a_rule_names, "LRP rule per layer kind, e.g. Dense=alpha_beta")
        ->take_all();
    attribute->add_option("--rule-param", a_rule_params, "LRP rule parameter per layer kind, e.g. Dense=2")
        ->take_all();
    attribute->add_option("--deeplift-rule", a_deeplift_rule, "rescale | reveal_cancel");
    attribute->add_option("--x-ref", a_xref, "DeepLift reference batch file (default: zeros)");
    attribute->add_option("--winner-takes-all", a_wta, "route max-pooling to the argmax (default true)");
    attribute->add_option("--output-idx", a_output_idx, "1-based output nodes, e.g. 1,3 or out:2");
    attribute->add_option("--ignore-last-act", a_ignore_last_act, "explain pre-activation outputs (default true)");
    attribute->add_option("--channels-first", a_channels_first, "data already has the channel axis first");
    attribute->add_option("--dtype", a_dtype, "float | double");
    attribute->add_option("--out-records", a_records, "records output (.csv or .jsonl)");
    attribute->add_option("--out-array", a_array, "optional named-array JSON output");

    // plot
    auto* plot = app.add_subcommand("plot", "render records as a static SVG");
    std::string p_records, p_kind = "bar", p_out = "plot.svg", p_aggr = "sum", p_data_idx, p_output_idx;
    std::string p_ref;
    double p_quantile = 0.5;
    bool p_same_scale = false;
    plot->add_option("--records", p_records, "records file (.csv or .jsonl)")->required();
    plot->add_option("--kind", p_kind, "bar | heatmap | boxplot");
    plot->add_option("--data-idx", p_data_idx, "1-based instance indices (boxplot: subset)");
    plot->add_option("--output-idx", p_output_idx, "1-based output positions or node labels");
    plot->add_option("--aggr-channels", p_aggr, "sum | mean | l2norm");
    plot->add_option("--ref-data-idx", p_ref, "1-based reference instance for boxplot overlay");
    plot->add_option("--quantile", p_quantile, "pixel-map quantile for image boxplots");
    plot->add_flag("--same-scale", p_same_scale, "share the color scale across input layers");
    plot->add_option("--out", p_out, "SVG output path");

    // check
    auto* check = app.add_subcommand("check", "engine-vs-oracle validity sweep on the architecture grid");
    std::uint64_t c_seed = 1;
    int c_seeds = 5;
    std::string c_emit;
    check->add_option("--grid-seed", c_seed, "base grid seed");
    check->add_option("--seeds", c_seeds, "number of consecutive seeds");
    check->add_option("--emit-dir", c_emit, "write grid models and datasets to this directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(v_model);

        if (attribute->parsed()) {
            ModelGraph graph = load_model_file(a_model);
            Dataset data;
            if (!a_data.empty()) {
                data = load_dataset(a_data, format_for(a_data, a_data_format), a_channels_first, graph);
            }

            AttributionConfig cfg;
            if (a_method == "gradient") cfg.method = Method::Gradient;
            else if (a_method == "smoothgrad") cfg.method = Method::SmoothGrad;
            else if (a_method == "lrp") cfg.method = Method::Lrp;
            else if (a_method == "deeplift") cfg.method = Method::DeepLift;
            else if (a_method == "connection-weights") cfg.method = Method::ConnectionWeights;
            else throw ValueError("unknown method \"" + a_method + "\"");
            cfg.times_input = a_times_input;
            cfg.n = a_n;
            cfg.noise_level = a_noise;
            cfg.seed = a_seed;
            cfg.winner_takes_all = a_wta;
            cfg.precision = a_dtype == "double" ? PrecisionMode::Double : PrecisionMode::Single;
            if (a_dtype != "float" && a_dtype != "double") throw ValueError("--dtype must be float or double");
            if (a_deeplift_rule == "rescale") cfg.deeplift_rule = DeepLiftRule::Rescale;
            else if (a_deeplift_rule == "reveal_cancel") cfg.deeplift_rule = DeepLiftRule::RevealCancel;
            else throw ValueError("unknown DeepLift rule \"" + a_deeplift_rule + "\"");
            for (const auto& tok : a_rule_names) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) throw ValueError("bad --rule-name \"" + tok + "\" (use Kind=rule)");
                const LayerKind kind = layer_kind_from(tok.substr(0, eq));
                const std::string rule = tok.substr(eq + 1);
                if (rule == "simple") cfg.rule_name[kind] = LrpRule::Simple;
                else if (rule == "epsilon") cfg.rule_name[kind] = LrpRule::Epsilon;
                else if (rule == "alpha_beta") cfg.rule_name[kind] = LrpRule::AlphaBeta;
                else throw ValueError("unknown LRP rule \"" + rule + "\"");
            }
            for (const auto& tok : a_rule_params) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) throw ValueError("bad --rule-param \"" + tok + "\" (use Kind=value)");
                cfg.rule_param[layer_kind_from(tok.substr(0, eq))] = std::stod(tok.substr(eq + 1));
            }
            if (!a_xref.empty() && a_xref != "zeros") {
                cfg.x_ref = load_dataset(a_xref, format_for(a_xref, ""), a_channels_first, graph);
            }
            cfg.selection = parse_output_idx(a_output_idx, graph);
            cfg.selection.use_pre_activation = a_ignore_last_act;

            const RelevanceResult result = run_attribution(graph, data, cfg);
            const auto records = to_records(result);
            const auto ext = std::filesystem::path(a_records).extension().string();
            write_text_file(a_records, ext == ".jsonl" ? records_to_jsonl(records) : records_to_csv(records));
            if (!a_array.empty()) write_text_file(a_array, arrays_to_json(to_array(result)));
            std::cerr << result.method_name << ": " << records.size() << " records -> " << a_records << "\n";
            return 0;
        }

        if (plot->parsed()) {
            const std::string text = read_text_file(p_records);
            const auto ext = std::filesystem::path(p_records).extension().string();
            const auto records = ext == ".jsonl" ? records_from_jsonl(text) : records_from_csv(text);

            PlotOptions opt;
            if (p_kind == "bar") opt.kind = PlotKind::Bar;
            else if (p_kind == "heatmap") opt.kind = PlotKind::Heatmap;
            else if (p_kind == "boxplot") opt.kind = PlotKind::Boxplot;
            else throw ValueError("unknown plot kind \"" + p_kind + "\"");
            if (!p_data_idx.empty()) opt.data_indices = parse_index_list(p_data_idx);
            if (!p_output_idx.empty()) {
                for (const auto& tok : split_list(p_output_idx)) {
                    opt.output_nodes.push_back(tok);
                }
            }
            if (p_aggr == "sum") opt.aggr = ChannelAggregation::Sum;
            else if (p_aggr == "mean") opt.aggr = ChannelAggregation::Mean;
            else if (p_aggr == "l2norm") opt.aggr = ChannelAggregation::L2Norm;
            else throw ValueError("unknown channel aggregation \"" + p_aggr + "\"");
            if (!p_ref.empty()) opt.ref_instance = parse_index_list(p_ref).at(0);
            opt.quantile = p_quantile;
            opt.same_scale = p_same_scale;

            // map 1-based output positions onto labels present in the records
            if (!opt.output_nodes.empty()) {
                std::vector<std::string> distinct;
                for (const auto& r : records) {
                    if (std::find(distinct.begin(), distinct.end(), r.output_node) == distinct.end()) {
                        distinct.push_back(r.output_node);
                    }
                }
                for (auto& label : opt.output_nodes) {
                    try {
                        const std::size_t pos = static_cast<std::size_t>(std::stoll(label) - 1);
                        if (pos < distinct.size()) label = distinct[pos];
                    } catch (const std::exception&) {
                        // already a label
                    }
                }
            }

            write_text_file(p_out, render_plot(records, opt));
            std::cerr << "wrote " << p_out << "\n";
            return 0;
        }

        if (check->parsed()) {
            const CheckReport report = run_validity_check(c_seed, c_seeds, env_threads(), c_emit);
            std::cout << format_check_report(report);
            return report.all_pass ? 0 : 1;
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
