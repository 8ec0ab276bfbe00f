#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nnattr/model_io.hpp"
#include "nnattr/results.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = NNATTR_CLI_PATH;
const std::string kData = NNATTR_TEST_DATA_DIR;

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "nnattr_cli_out.txt";
    const std::string cmd = kCli + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    int code = -1;
    if (WIFEXITED(status)) code = WEXITSTATUS(status);
    return {code, ss.str()};
}

fs::path tmp_dir() {
    const fs::path dir = fs::temp_directory_path() / "nnattr_cli_test";
    fs::create_directories(dir);
    return dir;
}

/// Minimal XML well-formedness walk: balanced tags, quoted attributes.
bool well_formed_xml(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    if (text.rfind("<?xml", 0) == 0) i = text.find("?>") + 2;
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        const std::size_t end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '/') {
            if (stack.empty()) return false;
            const std::string name = tag.substr(1);
            if (stack.back() != name) return false;
            stack.pop_back();
        } else if (tag.back() == '/') {
            continue; // self-closing
        } else {
            const std::size_t sp = tag.find_first_of(" \t\n");
            stack.push_back(sp == std::string::npos ? tag : tag.substr(0, sp));
        }
    }
    return stack.empty();
}

} // namespace

TEST_CASE("validate: clean model, cyclic model, missing file") {
    CHECK(run("validate --model " + kData + "/unit_bias.model.json").exit_code == 0);

    auto cyc = run("validate --model " + kData + "/cyclic.model.json");
    CHECK(cyc.exit_code == 1);
    CHECK(cyc.output.find("cycle") != std::string::npos);

    CHECK(run("validate --model " + kData + "/does_not_exist.json").exit_code == 2);
}

TEST_CASE("attribute: alpha-beta LRP restricted to output nodes 1 and 3") {
    const auto dir = tmp_dir();
    const std::string records = (dir / "lrp.csv").string();
    auto r = run("attribute --model " + kData + "/penguin_like.model.json --data " + kData +
                 "/penguin_like.data.csv --method lrp --rule-name Dense=alpha_beta --rule-param Dense=2"
                 " --output-idx 1,3 --out-records " + records);
    REQUIRE(r.exit_code == 0);
    auto recs = nnattr::records_from_csv(nnattr::read_text_file(records));
    CHECK(recs.size() == 10 * 4 * 2);
    for (const auto& rec : recs) {
        CHECK((rec.output_node == "Adelie" || rec.output_node == "Gentoo"));
        CHECK(rec.output_node != "Chinstrap");
    }
    CHECK(recs[0].data == "p1");
    CHECK(recs[0].feature == "bill_length");
}

TEST_CASE("attribute: gradient of an affine model returns the weight") {
    const auto dir = tmp_dir();
    const std::string records = (dir / "grad.csv").string();
    const std::string csv = (dir / "one.csv").string();
    nnattr::write_text_file(csv, "x\n1.0\n");
    auto r = run("attribute --model " + kData + "/unit_bias.model.json --data " + csv +
                 " --method gradient --out-records " + records);
    REQUIRE(r.exit_code == 0);
    auto recs = nnattr::records_from_csv(nnattr::read_text_file(records));
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].value == 1.0);
}

TEST_CASE("attribute: identical seeds give byte-identical outputs") {
    const auto dir = tmp_dir();
    const std::string r1 = (dir / "sg1.csv").string();
    const std::string r2 = (dir / "sg2.csv").string();
    const std::string base = "attribute --model " + kData + "/penguin_like.model.json --data " + kData +
                             "/penguin_like.data.csv --method smoothgrad --n 10 --seed 77 --out-records ";
    REQUIRE(run(base + r1).exit_code == 0);
    REQUIRE(run(base + r2).exit_code == 0);
    CHECK(nnattr::read_text_file(r1) == nnattr::read_text_file(r2));
}

TEST_CASE("attribute: connection weights needs data only when times-input is set") {
    const auto dir = tmp_dir();
    const std::string records = (dir / "cw.csv").string();
    CHECK(run("attribute --model " + kData + "/penguin_like.model.json --method connection-weights"
              " --out-records " + records).exit_code == 0);
    auto bad = run("attribute --model " + kData + "/penguin_like.model.json --method connection-weights"
                   " --times-input --out-records " + records);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("data") != std::string::npos);
}

TEST_CASE("plot: bar chart SVG is well-formed and self-contained") {
    const auto dir = tmp_dir();
    const std::string records = (dir / "bar.csv").string();
    const std::string svg = (dir / "bar.svg").string();
    REQUIRE(run("attribute --model " + kData + "/penguin_like.model.json --data " + kData +
                "/penguin_like.data.csv --method gradient --out-records " + records).exit_code == 0);
    REQUIRE(run("plot --records " + records + " --kind bar --data-idx 1,2 --output-idx 1,3 --out " + svg)
                .exit_code == 0);
    const std::string text = nnattr::read_text_file(svg);
    CHECK(well_formed_xml(text));
    CHECK(text.find("<svg") != std::string::npos);
    CHECK(text.find("href") == std::string::npos); // no external resources
    CHECK(text.find("url(") == std::string::npos);

    // boxplot with a reference overlay renders too
    const std::string box = (dir / "box.svg").string();
    REQUIRE(run("plot --records " + records + " --kind boxplot --ref-data-idx 1 --out " + box).exit_code == 0);
    CHECK(well_formed_xml(nnattr::read_text_file(box)));

    // heatmap on tabular records is an error
    auto bad = run("plot --records " + records + " --kind heatmap --out " + (dir / "h.svg").string());
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("tabular") != std::string::npos);
}

TEST_CASE("check: single-seed sweep passes") {
    auto r = run("check --grid-seed 1 --seeds 1");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("gradient vs finite differences") != std::string::npos);
    CHECK(r.output.find("all checks passed") != std::string::npos);
}
