#include "ftap/cli.hpp"
#include "ftap/error.hpp"
#include "ftap/tree_io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ftap;
namespace fs = std::filesystem;

namespace {

const fs::path kData = FTAP_DATA_DIR;

std::string data(const char* name) { return (kData / name).string(); }

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

nlohmann::json cli_json(std::vector<std::string> args, int expected_code = 0) {
    args.insert(args.begin(), {"--format", "json"});
    const CliRun r = cli_run(args);
    EXPECT_EQ(r.code, expected_code) << r.err;
    return nlohmann::json::parse(r.out);
}

void expect_error_containing(std::string_view text, const std::string& needle) {
    try {
        parse_tree(text, "doc.yaml");
        ADD_FAILURE() << "no error for " << needle;
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("ftap_test_" + name); }

}  // namespace

TEST(TreeIo, ParsesYaml) {
    const ScenarioTree t = read_tree(data("binomial.yaml"));
    EXPECT_EQ(t.num_leaves(), 2u);
    EXPECT_EQ(t.asset_names()[1], "stock");
    EXPECT_DOUBLE_EQ(t.price(*t.find("u"), 1), 8.0);
    EXPECT_TRUE(t.valid());
}

TEST(TreeIo, ParsesJsonWithQuotedNumbers) {
    const ScenarioTree t = read_tree(data("two_assets.json"));
    EXPECT_EQ(t.num_leaves(), 4u);
    EXPECT_DOUBLE_EQ(t.numeraire(*t.find("dd")), 1.05);
}

TEST(TreeIo, ErrorsNameTheLine) {
    expect_error_containing("horizon: 1\nassets: [bond, stock]\nnodes:\n  - {id: r, prices: [1, 4], colour: red}\n",
                            "doc.yaml:4");
    expect_error_containing("horizon: 1\nassets: [bond, stock]\nnodes:\n  - {id: r, prices: [1, x4]}\n", "doc.yaml:4");
    expect_error_containing("horizon: 1\nassets: [bond, stock]\nnodes: [\n", "doc.yaml:");
    expect_error_containing("assets: [bond, stock]\nnodes: []\n", "horizon");
}

TEST(TreeIo, ConstructorErrorsCarryTheSource) {
    expect_error_containing(
        "horizon: 1\nassets: [bond, stock]\nnodes:\n  - {id: r, prices: [1, 4]}\n  - {id: u, parent: q, prob: 1, "
        "prices: [1, 4]}\n",
        "doc.yaml");
}

TEST(TreeIo, FormatRoundTrips) {
    const ScenarioTree t = read_tree(data("two_period.yaml"));
    const ScenarioTree back = parse_tree(format_tree(t));
    ASSERT_EQ(back.num_nodes(), t.num_nodes());
    for (NodeIndex n = 0; n < t.num_nodes(); ++n) {
        EXPECT_EQ(back.id(n), t.id(n));
        EXPECT_EQ(back.edge_prob(n), t.edge_prob(n));
        for (int a = 0; a < t.num_assets(); ++a) EXPECT_EQ(back.price(n, a), t.price(n, a));
    }
}

TEST(TreeIo, Claims) {
    const ScenarioTree t = read_tree(data("binomial.yaml"));
    const Claim c = read_claim(data("binomial_call.yaml"), t);
    EXPECT_DOUBLE_EQ(c[0], 4.0);
    EXPECT_DOUBLE_EQ(c[1], 0.0);
    EXPECT_THROW(parse_claim("u: 4\n", t), InputError);
    EXPECT_THROW(parse_claim("u: 4\nd: 0\nr: 1\n", t), InputError);
    EXPECT_THROW(parse_claim("u: 4\nu: 1\nd: 0\n", t), InputError);
    EXPECT_THROW(parse_claim("u: 4\nd: -1\n", t), InputError);
}

TEST(TreeIo, MeasureRoundTrip) {
    const ScenarioTree t = read_tree(data("trinomial.yaml"));
    const Eigen::Vector3d q(0.1, 0.7, 0.2);
    const Measure m = parse_measure(format_leaf_map(t, q), t);
    EXPECT_EQ(m.leaf_prob(), Eigen::VectorXd(q));
    EXPECT_THROW(parse_measure("u: 0.5\nm: 0.5\nd: 0\n", t), InputError);
}

TEST(Cli, CheckArbitrageExitCodes) {
    const auto good = cli_json({"check-arbitrage", data("binomial.yaml")});
    EXPECT_EQ(good["verdict"], "no-arbitrage");
    EXPECT_NEAR(good["artifacts"]["emm"]["u"].get<double>(), 1.0 / 3, 1e-12);
    const auto bad = cli_json({"check-arbitrage", data("arbitrage.yaml")}, cli::kNegative);
    EXPECT_EQ(bad["verdict"], "arbitrage");
    const auto exact = cli_json({"check-arbitrage", "--exact", data("two_period.yaml")}, cli::kNegative);
    EXPECT_EQ(exact["verdict"], "arbitrage");
}

TEST(Cli, ErrorsExitOne) {
    EXPECT_EQ(cli_run({}).code, cli::kError);
    EXPECT_EQ(cli_run({"check-arbitrage", data("missing.yaml")}).code, cli::kError);
    EXPECT_EQ(cli_run({"bs", "--spot", "100"}).code, cli::kError);
    EXPECT_EQ(cli_run({"bs", "--spot", "-1", "--strike", "1", "--vol", "0.2", "--tau", "1"}).code, cli::kError);
    EXPECT_EQ(cli_run({"--help"}).code, cli::kOk);
}

TEST(Cli, CompletenessAndReplication) {
    EXPECT_EQ(cli_run({"complete", data("binomial.yaml")}).code, cli::kOk);
    const auto tri = cli_json({"complete", data("trinomial.yaml")}, cli::kNegative);
    EXPECT_EQ(tri["artifacts"]["dimension"], 1);
    const auto rep = cli_json({"replicate", data("binomial.yaml"), data("binomial_call.yaml")});
    EXPECT_NEAR(rep["artifacts"]["initial_price"].get<double>(), 4.0 / 3, 1e-12);
    EXPECT_EQ(cli_run({"replicate", data("trinomial.yaml"), data("trinomial_call.yaml")}).code, cli::kNegative);
}

TEST(Cli, SavedMeasureFeedsPrice) {
    const fs::path file = temp_file("second.yaml");
    EXPECT_EQ(cli_run({"second-measure", data("trinomial.yaml"), "--save-measure", file.string()}).code, cli::kOk);
    const auto p = cli_json({"price", data("trinomial.yaml"), data("trinomial_call.yaml"), "--measure", file.string()});
    const Measure m = read_measure(file, read_tree(data("trinomial.yaml")));
    EXPECT_NEAR(p["artifacts"]["price"].get<double>(), 4.0 * m.leaf_prob()[0], 1e-12);
    fs::remove(file);
}

TEST(Cli, ClosedFormVerbs) {
    const auto bs = cli_json({"bs", "--spot", "100", "--strike", "100", "--rate", "0.05", "--vol", "0.2", "--tau", "1"});
    EXPECT_NEAR(bs["artifacts"]["price"].get<double>(), 10.4506, 1e-3);
    const auto bach = cli_json({"bachelier", "--spot", "100", "--strike", "100", "--sigma", "20", "--tau", "1"});
    EXPECT_NEAR(bach["artifacts"]["price"].get<double>(), 7.97885, 1e-5);
    const auto br = cli_json({"bridge", "--spot", "100", "--strike", "100", "--rate", "0.05", "--vol", "0.2", "--tau",
                              "1", "--steps", "200"});
    EXPECT_NEAR(br["artifacts"]["price"].get<double>(), 10.4506, 2e-2);
}

TEST(Cli, Deterministic) {
    const std::vector<std::vector<std::string>> runs{
        {"--format", "json", "mc", "--spot", "100", "--strike", "100", "--vol", "0.2", "--tau", "1", "--seed", "9",
         "--paths", "5000"},
        {"mc", "--spot", "100", "--strike", "90", "--vol", "0.3", "--tau", "2", "--seed", "9", "--paths", "5000",
         "--threads", "3"},
        {"fuzz", "--seed", "4", "--count", "50"},
        {"select-measure", data("trinomial.yaml")},
        {"indifference", data("trinomial.yaml"), data("trinomial_call.yaml"), "--wealth", "1"},
        {"converge"},
    };
    for (const auto& args : runs) {
        const CliRun a = cli_run(args);
        const CliRun b = cli_run(args);
        EXPECT_EQ(a.code, cli::kOk) << a.err;
        EXPECT_EQ(a.out, b.out);
    }
}

TEST(Cli, McSeedIsReported) {
    const auto r = cli_json({"mc", "--spot", "100", "--strike", "100", "--vol", "0.2", "--tau", "1", "--seed", "77",
                             "--paths", "2000"});
    EXPECT_EQ(r["seed"], 77);
}
