#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"

namespace surfq::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
    int code = 0;
    std::string out, err;
    json report() const { return json::parse(out); }
};

Result invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "surfq");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Result r;
    r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "surfq_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream f(p);
    f << text;
}

TEST(Cli, GeomCylinder)
{
    const auto r = invoke({"geom", "--chart", "cylinder", "--params", "R=1", "--at", "0,0"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = r.report()["result"];
    EXPECT_NEAR(j["M"].get<double>(), 0.5, 1e-12);
    EXPECT_NEAR(j["K"].get<double>(), 0.0, 1e-12);
    EXPECT_NEAR(j["V_geo"].get<double>(), -0.125, 1e-12);
}

TEST(Cli, GeomLayerQuantities)
{
    const auto r = invoke({"geom", "--chart", "cylinder", "--params", "R=1", "--at", "0,0", "--u3", "0.2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto l = r.report()["result"]["layer"];
    // inward normal: sqrt(G) = R - u3, F = 1 / 2(R - u3)
    EXPECT_NEAR(l["sqrt_G"].get<double>(), 0.8, 1e-12);
    EXPECT_NEAR(l["F"].get<double>(), 1.0 / 1.6, 1e-12);
}

TEST(Cli, SpectrumPlane)
{
    const auto r = invoke({"spectrum", "--chart", "plane", "--grid", "4x4", "--count", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(r.report()["result"]["eigenvalues"][0].get<double>(), 0.0, 1e-12);
}

TEST(Cli, SpectrumWithReference)
{
    const auto r = invoke({"spectrum", "--chart", "sphere", "--params", "R=1", "--grid", "16x32", "--count", "4",
                           "--reference", "sphere"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ref = r.report()["result"]["reference"];
    EXPECT_EQ(ref["values"][1].get<double>(), 1.0);
    EXPECT_LT(ref["absolute_error"][3].get<double>(), 0.03);
}

TEST(Cli, ReportsEmbedConfigAndAreReproducible)
{
    const std::vector<std::string> args = {"spectrum", "--chart", "torus", "--params", "R=2,r=1", "--grid", "8x8",
                                           "--no-timestamp"};
    const auto a = invoke(args), b = invoke(args);
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto cfg = a.report()["config"];
    EXPECT_EQ(cfg["chart"], "torus");
    EXPECT_EQ(cfg["params"]["r"].get<double>(), 1.0);
    EXPECT_EQ(cfg["grid"][1].get<int>(), 8);
    EXPECT_FALSE(a.report().contains("timestamp"));
    EXPECT_TRUE(invoke({"spectrum", "--grid", "4x4"}).report().contains("timestamp"));
}

TEST(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(invoke({}).code, kUsage);
    EXPECT_EQ(invoke({"spectrum", "--bogus"}).code, kUsage);
    EXPECT_EQ(invoke({"spectrum", "--chart", "klein"}).code, kUsage);
    EXPECT_EQ(invoke({"spectrum", "--grid", "4xq"}).code, kUsage);
    EXPECT_EQ(invoke({"spectrum", "--chart", "torus", "--params", "R=2"}).code, kUsage);
    EXPECT_EQ(invoke({"spectrum", "--chart-file", "/nonexistent/chart.json"}).code, kUsage);
    EXPECT_EQ(invoke({"thin-layer", "--chart", "torus", "--params", "R=2,r=1", "--sector", "m=0", "--d", "0.2,0.1"}).code,
              kUsage);
}

TEST(Cli, NumericalErrorsExitThree)
{
    const auto r = invoke({"geom", "--chart", "sphere", "--params", "R=1", "--at", "0,0", "--errors-json"});
    EXPECT_EQ(r.code, kNumerical);
    const auto e = json::parse(r.err)["error"];
    EXPECT_EQ(e["kind"], "degenerate_metric");
    EXPECT_EQ(e["exit_code"].get<int>(), 3);
    EXPECT_EQ(invoke({"thin-layer", "--chart", "torus", "--params", "R=2,r=1", "--sector", "0", "--d", "2.5,0.2,0.1"})
                  .code,
              kNumerical);
}

TEST(Cli, ChartFile)
{
    const auto path = scratch("ring.json");
    write(path, R"j({"name": "periodic-cylinder", "x": "R*cos(u2)", "y": "R*sin(u2)", "z": "u1",
                   "u1": {"min": 0, "max": 6.283185307179586, "periodic": true},
                   "u2": {"min": 0, "max": 6.283185307179586, "periodic": true}, "params": {"R": 1}, "axisymmetric": true})j");
    const auto r = invoke({"em-spectrum", "--chart-file", path.string(), "--grid", "4x64", "--flux", "3.141592653589793",
                           "--count", "2", "--reference", "cylinder"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = r.report()["result"];
    // half flux quantum: (n - 1/2)^2 / 2 - 1/8 is zero for n = 0, 1
    EXPECT_NEAR(res["eigenvalues"][0].get<double>(), 0.0, 1e-3);
    EXPECT_NEAR(res["eigenvalues"][1].get<double>(), 0.0, 1e-3);
    EXPECT_EQ(r.report()["config"]["chart_file"], path.string());

    const auto bad = scratch("bad.json");
    write(bad, R"j({"x": "u1", "y": "u2", "z": "0", "u1": {"min": 0, "max": 1}, "u2": {"min": 0, "max": 1}, "colour": 1})j");
    const auto b = invoke({"spectrum", "--chart-file", bad.string(), "--errors-json"});
    EXPECT_EQ(b.code, kUsage);
    EXPECT_NE(b.err.find("colour"), std::string::npos);
}

TEST(Cli, FieldFileRejectsUnknownKeys)
{
    const auto good = scratch("field.json");
    write(good, R"j({"A": ["0", "0", "0"], "charge": 2, "scalar_potential": "0.5"})j");
    const auto r = invoke({"em-spectrum", "--chart", "plane", "--grid", "4x4", "--field", good.string(), "--count", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    // constant potential q V = 1 shifts the constant mode
    EXPECT_NEAR(r.report()["result"]["eigenvalues"][0].get<double>(), 1.0, 1e-12);
    const auto bad = scratch("field_bad.json");
    write(bad, R"j({"A": ["0", "0", "0"], "B": 1})j");
    EXPECT_EQ(invoke({"em-spectrum", "--chart", "plane", "--grid", "4x4", "--field", bad.string()}).code, kUsage);
}

TEST(Cli, AssembleWritesMatrixMarket)
{
    const auto mtx = scratch("h.mtx");
    const auto r = invoke({"assemble", "--chart", "torus", "--params", "R=2,r=1", "--grid", "6x8", "--operator",
                           "hamiltonian", "--matrix", mtx.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = r.report()["result"];
    EXPECT_EQ(res["size"].get<int>(), 48);
    EXPECT_LE(res["hermiticity_residual"].get<double>(), 1e-12);
    std::ifstream f(mtx);
    std::string first;
    std::getline(f, first);
    EXPECT_EQ(first, "%%MatrixMarket matrix coordinate real general");

    const auto layer = invoke({"assemble", "--chart", "cylinder", "--params", "R=1", "--grid", "6x8", "--operator",
                               "layer-normal", "--d", "0.2", "--n3", "4"});
    ASSERT_EQ(layer.code, 0) << layer.err;
    EXPECT_EQ(layer.report()["result"]["size"].get<int>(), 192);
}

TEST(Cli, PotentialCsv)
{
    const auto csv = scratch("v.csv");
    const auto r = invoke({"potential", "--chart", "torus", "--params", "R=2,r=1", "--grid", "8x4", "--csv",
                           csv.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = r.report()["result"];
    EXPECT_NEAR(res["min"].get<double>(), -0.5, 1e-12);  // theta = pi node
    EXPECT_EQ(res["nodes"].size(), 32u);
    std::ifstream f(csv);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "u1,u2,M,K,V_geo");
}

TEST(Cli, ThinLayer)
{
    const auto out = scratch("thin.json");
    const auto r = invoke({"thin-layer", "--chart", "torus", "--params", "R=2,r=1", "--sector", "m=0", "--d",
                           "0.2,0.1,0.05", "--n3", "16", "--surface-grid", "128", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    const auto j = json::parse(read_text_file(out.string()));
    EXPECT_TRUE(j["result"]["passed"].get<bool>());
    EXPECT_EQ(j["config"]["grid"][0].get<int>(), 128);
}

TEST(Cli, VerifyAll)
{
    const auto r = invoke({"verify", "--suite", "all"});
    EXPECT_EQ(r.code, kOk) << r.out;
    EXPECT_TRUE(r.report()["result"]["passed"].get<bool>());
    EXPECT_EQ(invoke({"verify", "--suite", "tlq"}).code, kOk);
}

}  // namespace
}  // namespace surfq::cli
