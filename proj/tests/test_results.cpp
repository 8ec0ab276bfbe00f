#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nnattr/results.hpp"
#include "testutil.hpp"

using namespace nnattr;

namespace {

/// Synthetic result: one tabular input layer, batch x features x outputs.
RelevanceResult tabular_result(std::int64_t batch, std::int64_t features, std::int64_t outputs) {
    RelevanceResult r;
    r.input_ids = {"in"};
    r.values.push_back(testutil::random_tensor<double>({batch, features, outputs}));
    AxisNames names(1);
    for (std::int64_t i = 1; i <= features; ++i) names[0].push_back("X" + std::to_string(i));
    r.input_names = {names};
    for (std::int64_t b = 1; b <= batch; ++b) r.instance_ids.push_back(std::to_string(b));
    for (std::int64_t u = 1; u <= outputs; ++u) {
        r.output_labels.push_back("Y" + std::to_string(u));
        r.output_layer_ids.push_back("out");
    }
    r.method_name = "test";
    return r;
}

RelevanceResult image_result(std::int64_t c, std::int64_t h, std::int64_t w) {
    RelevanceResult r;
    r.input_ids = {"img"};
    r.values.push_back(testutil::random_tensor<double>({1, c, h, w, 1}));
    AxisNames names(3);
    for (std::int64_t i = 1; i <= c; ++i) names[0].push_back("C" + std::to_string(i));
    for (std::int64_t i = 1; i <= h; ++i) names[1].push_back("H" + std::to_string(i));
    for (std::int64_t i = 1; i <= w; ++i) names[2].push_back("W" + std::to_string(i));
    r.input_names = {names};
    r.instance_ids = {"1"};
    r.output_labels = {"Y1"};
    r.output_layer_ids = {"out"};
    r.method_name = "test";
    return r;
}

} // namespace

TEST_CASE("named array carries shape 10x4x3 with dimension names") {
    auto r = tabular_result(10, 4, 3);
    auto arrays = to_array(r);
    REQUIRE(arrays.size() == 1);
    CHECK(arrays[0].shape == Shape{10, 4, 3});
    CHECK(arrays[0].dim_names.size() == 3);
    CHECK(arrays[0].dim_names[0].size() == 10);
    CHECK(arrays[0].dim_names[1] == std::vector<std::string>{"X1", "X2", "X3", "X4"});
    CHECK(arrays[0].dim_names[2] == std::vector<std::string>{"Y1", "Y2", "Y3"});
}

TEST_CASE("minimal 1x1x1 array") {
    auto r = tabular_result(1, 1, 1);
    auto arrays = to_array(r);
    CHECK(arrays[0].shape == Shape{1, 1, 1});
    CHECK(arrays[0].values.size() == 1);
}

TEST_CASE("two-input results produce one array per input layer") {
    auto r = tabular_result(2, 3, 1);
    r.input_ids.push_back("extra");
    r.values.push_back(testutil::random_tensor<double>({2, 2, 1}));
    r.input_names.push_back({{"A1", "A2"}});
    auto arrays = to_array(r);
    REQUIRE(arrays.size() == 2);
    CHECK(arrays[0].input_id == "in");
    CHECK(arrays[1].input_id == "extra");
    CHECK(arrays[1].shape == Shape{2, 2, 1});
}

TEST_CASE("a 10x4x3 result yields 120 records that round-trip exactly") {
    auto r = tabular_result(10, 4, 3);
    auto records = to_records(r);
    CHECK(records.size() == 120);
    // round trip: every record value equals the array entry it indexes
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& rec = records[k];
        const std::int64_t b = std::stoll(rec.data) - 1;
        const std::int64_t f = std::stoll(rec.feature.substr(1)) - 1;
        const std::int64_t u = std::stoll(rec.output_node.substr(1)) - 1;
        CHECK(rec.value == r.values[0].data[(b * 4 + f) * 3 + u]);
    }
    // canonical ordering: instance-major, then index, then output
    CHECK(records[0].data == "1");
    CHECK(records[0].feature == "X1");
    CHECK(records[0].output_node == "Y1");
    CHECK(records[1].output_node == "Y2");
    CHECK(records[3].feature == "X2");
    CHECK(records[12].data == "2");
}

TEST_CASE("image records carry channel and feature_2") {
    auto r = image_result(3, 2, 2);
    auto records = to_records(r);
    CHECK(records.size() == 12);
    for (const auto& rec : records) {
        CHECK(!rec.channel.empty());
        CHECK(!rec.feature_2.empty());
    }
    CHECK(records[0].channel == "C1");
    CHECK(records[0].feature == "H1");
    CHECK(records[0].feature_2 == "W1");
    CHECK(records[1].feature_2 == "W2");
    CHECK(records[4].channel == "C2");
}

TEST_CASE("records survive CSV and JSONL round trips") {
    auto r = tabular_result(3, 2, 2);
    auto records = to_records(r);
    auto csv_back = records_from_csv(records_to_csv(records));
    auto jsonl_back = records_from_jsonl(records_to_jsonl(records));
    REQUIRE(csv_back.size() == records.size());
    REQUIRE(jsonl_back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(csv_back[i].value == records[i].value); // shortest round-trip formatting is exact
        CHECK(csv_back[i].feature == records[i].feature);
        CHECK(jsonl_back[i].value == records[i].value);
        CHECK(jsonl_back[i].output_node == records[i].output_node);
    }
}

TEST_CASE("channel aggregation: sum, mean, l2norm") {
    auto r = image_result(3, 1, 1);
    r.values[0].data = {1.0, 2.0, 3.0};
    auto s = aggregate_channels(r, ChannelAggregation::Sum);
    CHECK(s.values[0].shape == Shape{1, 1, 1, 1});
    CHECK(s.values[0].data[0] == doctest::Approx(6.0));
    CHECK(s.input_names[0].size() == 2);

    r.values[0].data = {2.5, 2.5, 2.5};
    auto m = aggregate_channels(r, ChannelAggregation::Mean);
    CHECK(m.values[0].data[0] == doctest::Approx(2.5));

    auto r2 = image_result(2, 1, 1);
    r2.values[0].data = {3.0, 4.0};
    auto n = aggregate_channels(r2, ChannelAggregation::L2Norm);
    CHECK(n.values[0].data[0] == doctest::Approx(5.0));
}

TEST_CASE("channel aggregation rejects tabular results") {
    auto r = tabular_result(2, 3, 1);
    CHECK_THROWS_WITH_AS(aggregate_channels(r, ChannelAggregation::Sum), doctest::Contains("no channel axis"),
                         ValueError);
}

TEST_CASE("aggregate(sum) commutes with grouped record sums") {
    auto r = image_result(3, 2, 2);
    auto agg = aggregate_channels(r, ChannelAggregation::Sum);
    auto records = to_records(r);
    // group raw records by (feature, feature_2) and compare with the aggregate
    for (std::int64_t i = 0; i < 2; ++i) {
        for (std::int64_t j = 0; j < 2; ++j) {
            double total = 0;
            for (const auto& rec : records) {
                if (rec.feature == "H" + std::to_string(i + 1) && rec.feature_2 == "W" + std::to_string(j + 1)) {
                    total += rec.value;
                }
            }
            CHECK(agg.values[0].data[i * 2 + j] == doctest::Approx(total).epsilon(1e-12));
        }
    }
}

TEST_CASE("type-1 quantile uses lower interpolation") {
    std::vector<double> v{4, 1, 3, 2};
    CHECK(quantile_type1(v, 0.0) == 1);
    CHECK(quantile_type1(v, 0.25) == 1);
    CHECK(quantile_type1(v, 0.5) == 2);
    CHECK(quantile_type1(v, 0.75) == 3);
    CHECK(quantile_type1(v, 1.0) == 4);
    CHECK(quantile_type1({5.0}, 0.5) == 5.0);
}

TEST_CASE("summarize: singleton subset, abs preprocess, sort oracle") {
    auto r = tabular_result(7, 3, 2);
    // singleton: median equals that instance's preprocessed value
    auto t1 = summarize(r, {2}, 0.5, Preprocess::Abs);
    for (std::int64_t f = 0; f < 3; ++f) {
        for (std::int64_t u = 0; u < 2; ++u) {
            CHECK(t1.cell(0, f, u).median == std::abs(r.values[0].data[(2 * 3 + f) * 2 + u]));
        }
    }

    // abs makes everything non-negative
    std::vector<std::int64_t> all{0, 1, 2, 3, 4, 5, 6};
    auto t2 = summarize(r, all, 0.5, Preprocess::Abs);
    for (const auto& cell : t2.cells[0]) {
        CHECK(cell.min >= 0.0);
        CHECK(cell.q25 <= cell.median);
        CHECK(cell.median <= cell.q75);
    }

    // median matches an independent sort-and-pick oracle
    auto t3 = summarize(r, all, 0.5, Preprocess::Identity);
    for (std::int64_t f = 0; f < 3; ++f) {
        for (std::int64_t u = 0; u < 2; ++u) {
            std::vector<double> vals;
            for (std::int64_t b = 0; b < 7; ++b) vals.push_back(r.values[0].data[(b * 3 + f) * 2 + u]);
            std::sort(vals.begin(), vals.end());
            CHECK(t3.cell(0, f, u).median == vals[3]); // odd count: an actual data value
        }
    }
}

TEST_CASE("summarize reference values are raw, not preprocessed") {
    auto r = tabular_result(4, 2, 1);
    r.values[0].data[0] = -0.75; // instance 0, feature 0
    auto t = summarize(r, {0, 1, 2, 3}, 0.5, Preprocess::Abs, std::int64_t{0});
    REQUIRE(t.cell(0, 0, 0).reference.has_value());
    CHECK(*t.cell(0, 0, 0).reference == -0.75);
}

TEST_CASE("summarize rejects bad arguments") {
    auto r = tabular_result(3, 2, 1);
    CHECK_THROWS_AS(summarize(r, {}, 0.5, Preprocess::Abs), ValueError);
    CHECK_THROWS_AS(summarize(r, {0}, 1.5, Preprocess::Abs), ValueError);
    CHECK_THROWS_AS(summarize(r, {9}, 0.5, Preprocess::Abs), ValueError);
}
