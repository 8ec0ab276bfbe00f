#include "nnattr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace nnattr {

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::fixed << v;
    return os.str();
}

/// Values of one input layer reorganized as [instance][output][cell].
struct LayerCube {
    std::string input_id;
    bool is_image = false;               // has channel labels
    bool is_spatial = false;             // has feature_2 labels
    std::vector<std::string> channels;   // distinct, in order of appearance
    std::vector<std::string> rows;       // feature labels (height for images)
    std::vector<std::string> cols;       // feature_2 labels
    std::vector<std::vector<std::vector<double>>> value; // [inst][out][cell]

    std::int64_t cell_count() const {
        const std::int64_t c = is_image ? static_cast<std::int64_t>(channels.size()) : 1;
        const std::int64_t w = is_spatial ? static_cast<std::int64_t>(cols.size()) : 1;
        return c * static_cast<std::int64_t>(rows.size()) * w;
    }
    std::int64_t cell_index(std::int64_t ch, std::int64_t r, std::int64_t co) const {
        const std::int64_t w = is_spatial ? static_cast<std::int64_t>(cols.size()) : 1;
        return (ch * static_cast<std::int64_t>(rows.size()) + r) * w + co;
    }
};

struct RecordCube {
    std::vector<std::string> instances;
    std::vector<std::string> outputs;
    std::vector<LayerCube> layers;
};

std::int64_t index_of(std::vector<std::string>& list, const std::string& v) {
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i] == v) return static_cast<std::int64_t>(i);
    }
    list.push_back(v);
    return static_cast<std::int64_t>(list.size()) - 1;
}

RecordCube build_cube(const std::vector<RelevanceRecord>& records) {
    if (records.empty()) throw ValueError("no records to plot");
    RecordCube cube;
    std::vector<std::string> layer_ids;
    for (const auto& r : records) {
        index_of(cube.instances, r.data);
        index_of(cube.outputs, r.output_node);
        const std::int64_t li = index_of(layer_ids, r.model_input);
        if (li == static_cast<std::int64_t>(cube.layers.size())) {
            cube.layers.push_back({});
            cube.layers.back().input_id = r.model_input;
        }
        LayerCube& lc = cube.layers[static_cast<std::size_t>(li)];
        if (!r.channel.empty()) lc.is_image = true;
        if (!r.feature_2.empty()) lc.is_spatial = true;
        if (!r.channel.empty()) index_of(lc.channels, r.channel);
        index_of(lc.rows, r.feature);
        if (!r.feature_2.empty()) index_of(lc.cols, r.feature_2);
    }
    for (auto& lc : cube.layers) {
        lc.value.assign(cube.instances.size(),
                        std::vector<std::vector<double>>(cube.outputs.size(),
                                                         std::vector<double>(lc.cell_count(), 0.0)));
    }
    auto lookup = [](const std::vector<std::string>& list) {
        std::map<std::string, std::int64_t> m;
        for (std::size_t i = 0; i < list.size(); ++i) m[list[i]] = static_cast<std::int64_t>(i);
        return m;
    };
    const auto inst_idx = lookup(cube.instances);
    const auto out_idx = lookup(cube.outputs);
    std::map<std::string, std::size_t> layer_idx;
    std::vector<std::map<std::string, std::int64_t>> ch_idx, row_idx, col_idx;
    for (std::size_t li = 0; li < cube.layers.size(); ++li) {
        layer_idx[cube.layers[li].input_id] = li;
        ch_idx.push_back(lookup(cube.layers[li].channels));
        row_idx.push_back(lookup(cube.layers[li].rows));
        col_idx.push_back(lookup(cube.layers[li].cols));
    }
    for (const auto& r : records) {
        const std::size_t li = layer_idx.at(r.model_input);
        LayerCube& lc = cube.layers[li];
        const std::int64_t ch = r.channel.empty() ? 0 : ch_idx[li].at(r.channel);
        const std::int64_t row = row_idx[li].at(r.feature);
        const std::int64_t col = r.feature_2.empty() ? 0 : col_idx[li].at(r.feature_2);
        lc.value[static_cast<std::size_t>(inst_idx.at(r.data))][static_cast<std::size_t>(out_idx.at(r.output_node))]
                [static_cast<std::size_t>(lc.cell_index(ch, row, col))] = r.value;
    }
    return cube;
}

/// Sum channels away so heatmaps are [rows x cols].
void aggregate_cube_channels(LayerCube& lc, ChannelAggregation mode) {
    if (!lc.is_image) return;
    const auto nc = static_cast<std::int64_t>(lc.channels.size());
    for (auto& per_out : lc.value) {
        for (auto& cells : per_out) {
            std::vector<double> agg(static_cast<std::size_t>(lc.rows.size() * lc.cols.size()), 0.0);
            for (std::int64_t ch = 0; ch < nc; ++ch) {
                for (std::size_t rc = 0; rc < agg.size(); ++rc) {
                    const double v = cells[static_cast<std::size_t>(ch) * agg.size() + rc];
                    agg[rc] += mode == ChannelAggregation::L2Norm ? v * v : v;
                }
            }
            for (auto& v : agg) {
                if (mode == ChannelAggregation::Mean) v /= static_cast<double>(nc);
                if (mode == ChannelAggregation::L2Norm) v = std::sqrt(v);
            }
            cells = std::move(agg);
        }
    }
    lc.is_image = false;
    lc.channels.clear();
}

} // namespace

std::string diverging_color(double t) {
    t = std::clamp(t, -1.0, 1.0);
    const double r0 = 255, g0 = 255, b0 = 255;
    double r1, g1, b1;
    if (t >= 0) {
        r1 = 178; g1 = 24; b1 = 43; // red for positive relevance
    } else {
        r1 = 33; g1 = 102; b1 = 172; // blue for negative
        t = -t;
    }
    const int r = static_cast<int>(std::lround(r0 + t * (r1 - r0)));
    const int g = static_cast<int>(std::lround(g0 + t * (g1 - g0)));
    const int b = static_cast<int>(std::lround(b0 + t * (b1 - b0)));
    std::ostringstream os;
    os << "rgb(" << r << "," << g << "," << b << ")";
    return os.str();
}

namespace {

constexpr double kPanelW = 280, kPanelH = 210, kMarginL = 56, kMarginB = 46, kMarginT = 28, kMarginR = 12;

void panel_frame(std::ostringstream& svg, double ox, double oy, const std::string& title) {
    svg << "<text x=\"" << num(ox + kPanelW / 2) << "\" y=\"" << num(oy + 16)
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << xml_escape(title)
        << "</text>\n";
    svg << "<rect x=\"" << num(ox + kMarginL) << "\" y=\"" << num(oy + kMarginT) << "\" width=\""
        << num(kPanelW - kMarginL - kMarginR) << "\" height=\"" << num(kPanelH - kMarginT - kMarginB)
        << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"0.6\"/>\n";
}

void draw_bars(std::ostringstream& svg, double ox, double oy, const std::vector<std::string>& labels,
               const std::vector<double>& values, double scale) {
    const double plot_w = kPanelW - kMarginL - kMarginR;
    const double plot_h = kPanelH - kMarginT - kMarginB;
    const double zero_y = oy + kMarginT + plot_h / 2;
    svg << "<line x1=\"" << num(ox + kMarginL) << "\" y1=\"" << num(zero_y) << "\" x2=\""
        << num(ox + kMarginL + plot_w) << "\" y2=\"" << num(zero_y) << "\" stroke=\"#444\" stroke-width=\"0.8\"/>\n";
    const double bw = plot_w / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double v = values[i];
        const double t = scale > 0 ? v / scale : 0.0;
        const double h = std::abs(t) * (plot_h / 2);
        const double x = ox + kMarginL + bw * static_cast<double>(i) + bw * 0.125;
        const double y = v >= 0 ? zero_y - h : zero_y;
        svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bw * 0.75) << "\" height=\""
            << num(h) << "\" fill=\"" << diverging_color(t) << "\" stroke=\"#555\" stroke-width=\"0.4\"/>\n";
        svg << "<text x=\"" << num(x + bw * 0.375) << "\" y=\"" << num(oy + kPanelH - kMarginB + 14)
            << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">" << xml_escape(labels[i])
            << "</text>\n";
    }
    // value scale annotation
    svg << "<text x=\"" << num(ox + 6) << "\" y=\"" << num(oy + kMarginT + 10)
        << "\" font-size=\"8\" font-family=\"sans-serif\">" << format_double(scale) << "</text>\n";
    svg << "<text x=\"" << num(ox + 6) << "\" y=\"" << num(oy + kMarginT + plot_h)
        << "\" font-size=\"8\" font-family=\"sans-serif\">-" << format_double(scale) << "</text>\n";
}

void draw_heatmap(std::ostringstream& svg, double ox, double oy, std::size_t n_rows, std::size_t n_cols,
                  const std::vector<double>& cells, double scale) {
    const double plot_w = kPanelW - kMarginL - kMarginR;
    const double plot_h = kPanelH - kMarginT - kMarginB;
    const double cw = plot_w / static_cast<double>(n_cols);
    const double chh = plot_h / static_cast<double>(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t c = 0; c < n_cols; ++c) {
            const double v = cells[r * n_cols + c];
            const double t = scale > 0 ? v / scale : 0.0;
            svg << "<rect x=\"" << num(ox + kMarginL + cw * static_cast<double>(c)) << "\" y=\""
                << num(oy + kMarginT + chh * static_cast<double>(r)) << "\" width=\"" << num(cw + 0.05)
                << "\" height=\"" << num(chh + 0.05) << "\" fill=\"" << diverging_color(t) << "\"/>\n";
        }
    }
    svg << "<text x=\"" << num(ox + 6) << "\" y=\"" << num(oy + kMarginT + 10)
        << "\" font-size=\"8\" font-family=\"sans-serif\">max |v| = " << format_double(scale) << "</text>\n";
}

void draw_boxes(std::ostringstream& svg, double ox, double oy, const std::vector<std::string>& labels,
                const std::vector<SummaryCell>& stats, const std::vector<double>* reference) {
    const double plot_w = kPanelW - kMarginL - kMarginR;
    const double plot_h = kPanelH - kMarginT - kMarginB;
    double lo = 0, hi = 0;
    for (const auto& s : stats) {
        lo = std::min(lo, s.min);
        hi = std::max(hi, s.max);
    }
    if (reference) {
        for (double v : *reference) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi <= lo) hi = lo + 1;
    auto ypos = [&](double v) { return oy + kMarginT + (hi - v) / (hi - lo) * plot_h; };
    const double bw = plot_w / static_cast<double>(labels.size());

    if (lo < 0 && hi > 0) {
        svg << "<line x1=\"" << num(ox + kMarginL) << "\" y1=\"" << num(ypos(0)) << "\" x2=\""
            << num(ox + kMarginL + plot_w) << "\" y2=\"" << num(ypos(0))
            << "\" stroke=\"#bbb\" stroke-width=\"0.6\"/>\n";
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& s = stats[i];
        const double cx = ox + kMarginL + bw * (static_cast<double>(i) + 0.5);
        const double half = bw * 0.3;
        svg << "<line x1=\"" << num(cx) << "\" y1=\"" << num(ypos(s.min)) << "\" x2=\"" << num(cx) << "\" y2=\""
            << num(ypos(s.max)) << "\" stroke=\"#333\" stroke-width=\"0.7\"/>\n";
        svg << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(ypos(s.q75)) << "\" width=\"" << num(2 * half)
            << "\" height=\"" << num(std::max(0.5, ypos(s.q25) - ypos(s.q75)))
            << "\" fill=\"#cfe3f5\" stroke=\"#333\" stroke-width=\"0.7\"/>\n";
        svg << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(ypos(s.median)) << "\" x2=\"" << num(cx + half)
            << "\" y2=\"" << num(ypos(s.median)) << "\" stroke=\"#333\" stroke-width=\"1.2\"/>\n";
        svg << "<text x=\"" << num(cx) << "\" y=\"" << num(oy + kPanelH - kMarginB + 14)
            << "\" text-anchor=\"middle\" font-size=\"9\" font-family=\"sans-serif\">" << xml_escape(labels[i])
            << "</text>\n";
    }
    if (reference) {
        svg << "<polyline fill=\"none\" stroke=\"rgb(200,30,30)\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < reference->size(); ++i) {
            const double cx = ox + kMarginL + bw * (static_cast<double>(i) + 0.5);
            svg << num(cx) << "," << num(ypos((*reference)[i])) << " ";
        }
        svg << "\"/>\n";
    }
    svg << "<text x=\"" << num(ox + 4) << "\" y=\"" << num(ypos(hi) + 8)
        << "\" font-size=\"8\" font-family=\"sans-serif\">" << format_double(hi) << "</text>\n";
    svg << "<text x=\"" << num(ox + 4) << "\" y=\"" << num(ypos(lo))
        << "\" font-size=\"8\" font-family=\"sans-serif\">" << format_double(lo) << "</text>\n";
}

} // namespace

std::string render_plot(const std::vector<RelevanceRecord>& records, const PlotOptions& options) {
    RecordCube cube = build_cube(records);

    std::vector<std::int64_t> outputs;
    if (options.output_nodes.empty()) {
        for (std::size_t i = 0; i < cube.outputs.size(); ++i) outputs.push_back(static_cast<std::int64_t>(i));
    } else {
        for (const auto& want : options.output_nodes) {
            const auto it = std::find(cube.outputs.begin(), cube.outputs.end(), want);
            if (it == cube.outputs.end()) throw ValueError("output node \"" + want + "\" not present in records");
            outputs.push_back(it - cube.outputs.begin());
        }
    }

    std::vector<std::int64_t> instances;
    if (options.data_indices.empty()) {
        if (options.kind == PlotKind::Boxplot) {
            for (std::size_t i = 0; i < cube.instances.size(); ++i) instances.push_back(static_cast<std::int64_t>(i));
        } else {
            instances.push_back(0);
        }
    } else {
        for (auto i : options.data_indices) {
            if (i < 0 || i >= static_cast<std::int64_t>(cube.instances.size())) {
                throw ValueError("data index " + std::to_string(i + 1) + " out of range; records hold " +
                                 std::to_string(cube.instances.size()) + " instances");
            }
            instances.push_back(i);
        }
    }
    if (options.ref_instance &&
        (*options.ref_instance < 0 || *options.ref_instance >= static_cast<std::int64_t>(cube.instances.size()))) {
        throw ValueError("reference data index out of range");
    }

    if (options.kind == PlotKind::Bar) {
        for (const auto& lc : cube.layers) {
            if (lc.is_image || lc.is_spatial) {
                throw ValueError("bar chart needs tabular records; input \"" + lc.input_id +
                                 "\" is spatial (use heatmap)");
            }
        }
    }
    if (options.kind == PlotKind::Heatmap) {
        for (const auto& lc : cube.layers) {
            if (!lc.is_spatial) {
                throw ValueError("heatmap needs image records; input \"" + lc.input_id +
                                 "\" is tabular (use bar or boxplot)");
            }
        }
        for (auto& lc : cube.layers) aggregate_cube_channels(lc, options.aggr);
    }

    const std::size_t n_rows = options.kind == PlotKind::Boxplot ? 1 : instances.size();
    const std::size_t n_cols = outputs.size() * cube.layers.size();
    const double width = kPanelW * static_cast<double>(n_cols);
    const double height = kPanelH * static_cast<double>(n_rows);

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    if (options.kind == PlotKind::Boxplot) {
        std::size_t col = 0;
        for (std::size_t li = 0; li < cube.layers.size(); ++li) {
            LayerCube& lc = cube.layers[li];
            const bool image = lc.is_spatial;
            if (image && lc.is_image) aggregate_cube_channels(lc, options.aggr);
            for (auto oi : outputs) {
                const double ox = kPanelW * static_cast<double>(col++);
                const std::string title = "summary | " + lc.input_id + " | " + cube.outputs[oi];
                panel_frame(svg, ox, 0, title);
                if (!image) {
                    std::vector<SummaryCell> stats(lc.rows.size());
                    for (std::size_t f = 0; f < lc.rows.size(); ++f) {
                        std::vector<double> sample;
                        for (auto bi : instances) {
                            sample.push_back(lc.value[static_cast<std::size_t>(bi)][static_cast<std::size_t>(oi)][f]);
                        }
                        SummaryCell s;
                        s.q25 = quantile_type1(sample, 0.25);
                        s.median = quantile_type1(sample, 0.5);
                        s.q75 = quantile_type1(sample, 0.75);
                        s.min = *std::min_element(sample.begin(), sample.end());
                        s.max = *std::max_element(sample.begin(), sample.end());
                        stats[f] = s;
                    }
                    std::vector<double> ref;
                    if (options.ref_instance) {
                        for (std::size_t f = 0; f < lc.rows.size(); ++f) {
                            ref.push_back(lc.value[static_cast<std::size_t>(*options.ref_instance)]
                                                  [static_cast<std::size_t>(oi)][f]);
                        }
                    }
                    draw_boxes(svg, ox, 0, lc.rows, stats, options.ref_instance ? &ref : nullptr);
                } else {
                    // pixel-wise quantile raster
                    const std::size_t cells_n = lc.rows.size() * lc.cols.size();
                    std::vector<double> cells(cells_n);
                    for (std::size_t rc = 0; rc < cells_n; ++rc) {
                        std::vector<double> sample;
                        for (auto bi : instances) {
                            sample.push_back(
                                lc.value[static_cast<std::size_t>(bi)][static_cast<std::size_t>(oi)][rc]);
                        }
                        cells[rc] = quantile_type1(sample, options.quantile);
                    }
                    double scale = 0;
                    for (double v : cells) scale = std::max(scale, std::abs(v));
                    draw_heatmap(svg, ox, 0, lc.rows.size(), lc.cols.size(), cells, scale);
                }
            }
        }
    } else {
        for (std::size_t r = 0; r < instances.size(); ++r) {
            const auto bi = static_cast<std::size_t>(instances[r]);
            // per (instance, output) scale group; shared across layers when same_scale
            for (std::size_t o = 0; o < outputs.size(); ++o) {
                const auto oi = static_cast<std::size_t>(outputs[o]);
                double shared_scale = 0;
                if (options.same_scale) {
                    for (const auto& lc : cube.layers) {
                        for (double v : lc.value[bi][oi]) shared_scale = std::max(shared_scale, std::abs(v));
                    }
                }
                for (std::size_t li = 0; li < cube.layers.size(); ++li) {
                    const LayerCube& lc = cube.layers[li];
                    double scale = shared_scale;
                    if (!options.same_scale) {
                        for (double v : lc.value[bi][oi]) scale = std::max(scale, std::abs(v));
                    }
                    const double ox = kPanelW * static_cast<double>(o * cube.layers.size() + li);
                    const double oy = kPanelH * static_cast<double>(r);
                    const std::string title =
                        cube.instances[bi] + " | " + lc.input_id + " | " + cube.outputs[oi];
                    panel_frame(svg, ox, oy, title);
                    if (options.kind == PlotKind::Bar) {
                        draw_bars(svg, ox, oy, lc.rows, lc.value[bi][oi], scale);
                    } else {
                        draw_heatmap(svg, ox, oy, lc.rows.size(), lc.cols.size(), lc.value[bi][oi], scale);
                    }
                }
            }
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace nnattr
