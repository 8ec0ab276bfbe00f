#include "nnattr/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace nnattr {

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::vector<NamedArray> to_array(const RelevanceResult& result) {
    std::vector<NamedArray> arrays;
    for (std::size_t ii = 0; ii < result.input_ids.size(); ++ii) {
        NamedArray a;
        a.input_id = result.input_ids[ii];
        a.shape = result.values[ii].shape;
        a.values = result.values[ii].data;
        a.dim_names.push_back(result.instance_ids);
        for (const auto& axis : result.input_names[ii]) a.dim_names.push_back(axis);
        a.dim_names.push_back(result.output_labels);
        arrays.push_back(std::move(a));
    }
    return arrays;
}

std::vector<RelevanceRecord> to_records(const RelevanceResult& result) {
    std::vector<RelevanceRecord> records;
    const std::int64_t n_out = result.n_outputs();
    const std::int64_t batch = result.batch_size();
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::size_t ii = 0; ii < result.input_ids.size(); ++ii) {
            const Tensor<double>& vals = result.values[ii];
            const AxisNames& names = result.input_names[ii];
            const Shape inst(vals.shape.begin() + 1, vals.shape.end() - 1);
            const std::int64_t flat = numel(inst);
            for (std::int64_t e = 0; e < flat; ++e) {
                // decompose e into per-axis indices, row-major
                std::vector<std::int64_t> idx(inst.size());
                std::int64_t rem = e;
                for (std::size_t a = inst.size(); a-- > 0;) {
                    idx[a] = rem % inst[a];
                    rem /= inst[a];
                }
                for (std::int64_t u = 0; u < n_out; ++u) {
                    RelevanceRecord r;
                    r.data = result.instance_ids[static_cast<std::size_t>(b)];
                    r.model_input = result.input_ids[ii];
                    r.model_output = result.output_layer_ids[static_cast<std::size_t>(u)];
                    r.output_node = result.output_labels[static_cast<std::size_t>(u)];
                    if (inst.size() == 1) {
                        r.feature = names[0][static_cast<std::size_t>(idx[0])];
                    } else if (inst.size() == 2) {
                        r.feature = names[0][static_cast<std::size_t>(idx[0])];
                        r.feature_2 = names[1][static_cast<std::size_t>(idx[1])];
                    } else if (inst.size() == 3) {
                        r.channel = names[0][static_cast<std::size_t>(idx[0])];
                        r.feature = names[1][static_cast<std::size_t>(idx[1])];
                        r.feature_2 = names[2][static_cast<std::size_t>(idx[2])];
                    }
                    r.value = vals.data[(b * flat + e) * n_out + u];
                    records.push_back(std::move(r));
                }
            }
        }
    }
    return records;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

constexpr const char* kRecordHeader = "data,model_input,model_output,feature,feature_2,channel,output_node,value";

} // namespace

std::string records_to_csv(const std::vector<RelevanceRecord>& records) {
    std::string out = std::string(kRecordHeader) + "\n";
    for (const auto& r : records) {
        out += csv_escape(r.data) + "," + csv_escape(r.model_input) + "," + csv_escape(r.model_output) + "," +
               csv_escape(r.feature) + "," + csv_escape(r.feature_2) + "," + csv_escape(r.channel) + "," +
               csv_escape(r.output_node) + "," + format_double(r.value) + "\n";
    }
    return out;
}

std::string records_to_jsonl(const std::vector<RelevanceRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["data"] = r.data;
        j["model_input"] = r.model_input;
        j["model_output"] = r.model_output;
        j["feature"] = r.feature;
        j["feature_2"] = r.feature_2;
        j["channel"] = r.channel;
        j["output_node"] = r.output_node;
        j["value"] = r.value;
        out += j.dump() + "\n";
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

} // namespace

std::vector<RelevanceRecord> records_from_csv(const std::string& text) {
    std::vector<RelevanceRecord> records;
    std::istringstream stream(text);
    std::string line;
    bool first = true;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            if (line != kRecordHeader) throw ParseError("record CSV header mismatch: got \"" + line + "\"");
            first = false;
            continue;
        }
        auto cells = split_csv_line(line);
        if (cells.size() != 8) throw ParseError("record CSV row with " + std::to_string(cells.size()) + " cells");
        RelevanceRecord r;
        r.data = cells[0];
        r.model_input = cells[1];
        r.model_output = cells[2];
        r.feature = cells[3];
        r.feature_2 = cells[4];
        r.channel = cells[5];
        r.output_node = cells[6];
        try {
            r.value = std::stod(cells[7]);
        } catch (const std::exception&) {
            throw ParseError("record CSV: non-numeric value \"" + cells[7] + "\"");
        }
        records.push_back(std::move(r));
    }
    if (first) throw ParseError("record CSV is empty");
    return records;
}

std::vector<RelevanceRecord> records_from_jsonl(const std::string& text) {
    std::vector<RelevanceRecord> records;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("record JSONL: ") + e.what());
        }
        RelevanceRecord r;
        r.data = j.at("data").get<std::string>();
        r.model_input = j.at("model_input").get<std::string>();
        r.model_output = j.at("model_output").get<std::string>();
        r.feature = j.at("feature").get<std::string>();
        r.feature_2 = j.at("feature_2").get<std::string>();
        r.channel = j.at("channel").get<std::string>();
        r.output_node = j.at("output_node").get<std::string>();
        r.value = j.at("value").get<double>();
        records.push_back(std::move(r));
    }
    if (records.empty()) throw ParseError("record JSONL is empty");
    return records;
}

std::string arrays_to_json(const std::vector<NamedArray>& arrays) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& a : arrays) {
        nlohmann::ordered_json j;
        j["input"] = a.input_id;
        j["shape"] = a.shape;
        j["dimnames"] = a.dim_names;
        j["values"] = a.values;
        doc.push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

RelevanceResult aggregate_channels(const RelevanceResult& result, ChannelAggregation mode) {
    bool any = false;
    RelevanceResult out = result;
    for (std::size_t ii = 0; ii < result.input_ids.size(); ++ii) {
        const Tensor<double>& vals = result.values[ii];
        if (vals.rank() != 5) continue; // [B x C x H x W x U]
        any = true;
        const std::int64_t b = vals.shape[0], c = vals.shape[1], h = vals.shape[2], w = vals.shape[3],
                           u = vals.shape[4];
        Tensor<double> agg({b, h, w, u});
        for (std::int64_t bi = 0; bi < b; ++bi) {
            for (std::int64_t i = 0; i < h; ++i) {
                for (std::int64_t j = 0; j < w; ++j) {
                    for (std::int64_t o = 0; o < u; ++o) {
                        double acc = 0;
                        for (std::int64_t ci = 0; ci < c; ++ci) {
                            const double v = vals.data[((((bi * c + ci) * h + i) * w + j)) * u + o];
                            switch (mode) {
                                case ChannelAggregation::Sum:
                                case ChannelAggregation::Mean: acc += v; break;
                                case ChannelAggregation::L2Norm: acc += v * v; break;
                            }
                        }
                        if (mode == ChannelAggregation::Mean) acc /= static_cast<double>(c);
                        if (mode == ChannelAggregation::L2Norm) acc = std::sqrt(acc);
                        agg.data[(((bi * h + i) * w + j)) * u + o] = acc;
                    }
                }
            }
        }
        out.values[ii] = std::move(agg);
        out.input_names[ii] = {result.input_names[ii][1], result.input_names[ii][2]};
    }
    if (!any) throw ValueError("no channel axis: result has tabular inputs only");
    return out;
}

double quantile_type1(std::vector<double> values, double q) {
    if (values.empty()) throw ValueError("quantile of an empty set");
    if (q < 0.0 || q > 1.0) throw ValueError("quantile q must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<std::int64_t>(values.size());
    std::int64_t idx = q <= 0.0 ? 0 : static_cast<std::int64_t>(std::ceil(q * static_cast<double>(n))) - 1;
    idx = std::clamp<std::int64_t>(idx, 0, n - 1);
    return values[static_cast<std::size_t>(idx)];
}

SummaryTable summarize(const RelevanceResult& result, const std::vector<std::int64_t>& instance_subset,
                       double q, Preprocess preprocess, std::optional<std::int64_t> reference_instance) {
    if (instance_subset.empty()) throw ValueError("summarize: instance subset is empty");
    if (q < 0.0 || q > 1.0) throw ValueError("summarize: quantile must be in [0, 1]");
    const std::int64_t batch = result.batch_size();
    for (auto i : instance_subset) {
        if (i < 0 || i >= batch) throw ValueError("summarize: instance index out of range");
    }
    if (reference_instance && (*reference_instance < 0 || *reference_instance >= batch)) {
        throw ValueError("summarize: reference instance out of range");
    }

    auto pre = [&](double v) {
        switch (preprocess) {
            case Preprocess::Abs: return std::abs(v);
            case Preprocess::Identity: return v;
            case Preprocess::Square: return v * v;
        }
        return v;
    };

    SummaryTable table;
    table.input_ids = result.input_ids;
    table.input_names = result.input_names;
    table.output_labels = result.output_labels;
    const std::int64_t n_out = result.n_outputs();
    for (std::size_t ii = 0; ii < result.input_ids.size(); ++ii) {
        const Tensor<double>& vals = result.values[ii];
        const Shape inst(vals.shape.begin() + 1, vals.shape.end() - 1);
        const std::int64_t flat = numel(inst);
        table.cell_shapes.push_back(inst);
        std::vector<SummaryCell> cells(static_cast<std::size_t>(flat * n_out));
        for (std::int64_t e = 0; e < flat; ++e) {
            for (std::int64_t u = 0; u < n_out; ++u) {
                std::vector<double> sample;
                sample.reserve(instance_subset.size());
                for (auto b : instance_subset) {
                    sample.push_back(pre(vals.data[(b * flat + e) * n_out + u]));
                }
                SummaryCell cell;
                cell.q25 = quantile_type1(sample, 0.25);
                cell.median = quantile_type1(sample, 0.5);
                cell.q75 = quantile_type1(sample, 0.75);
                cell.quantile = quantile_type1(sample, q);
                cell.min = *std::min_element(sample.begin(), sample.end());
                cell.max = *std::max_element(sample.begin(), sample.end());
                double sum = 0;
                for (double v : sample) sum += v;
                cell.mean = sum / static_cast<double>(sample.size());
                if (reference_instance) {
                    cell.reference = vals.data[(*reference_instance * flat + e) * n_out + u];
                }
                cells[static_cast<std::size_t>(e * n_out + u)] = cell;
            }
        }
        table.cells.push_back(std::move(cells));
    }
    return table;
}

} // namespace nnattr
