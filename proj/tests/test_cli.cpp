#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "chainforge/cli.hpp"
#include "chainforge/report.hpp"

using namespace chainforge;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("chainforge_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST(Cli, RequiresASubcommand) {
  EXPECT_NE(cli({}).code, 0);
  EXPECT_NE(cli({"bogus"}).code, 0);
}

TEST(Cli, TablesCsv) {
  const auto r = cli({"tables", "--which", "size-linear", "--format", "csv"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("10^8,1525.88 MB"), std::string::npos);
  EXPECT_NE(r.out.find("7629.39 MB\n"), std::string::npos);
  EXPECT_NE(cli({"tables", "--which", "everything"}).code, 0);
  EXPECT_NE(cli({"tables", "--which", "instr-dense"}).out.find("60 (-25%)"), std::string::npos);
}

TEST(Cli, SimulateCsvAndLog) {
  const auto dir = scratch("sim");
  const auto log = (dir / "log.txt").string();
  const auto r = cli({"simulate", "--scenario", "linear", "--scheme", "marshalling", "--k", "2", "--n", "100",
                      "--dump-log", log});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const auto rows = report::parse_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].metrics.bytes_h2d, 1648u);
  EXPECT_EQ(rows[0].metrics.attach_ops, 3u);
  EXPECT_TRUE(rows[0].metrics.verified);
  EXPECT_EQ(slurp(log).substr(0, 16), "H2D,bulk,1648,0\n");
  fs::remove_all(dir);
}

TEST(Cli, SimulateErrorsUseExitCodeTwo) {
  const auto r = cli({"simulate", "--scenario", "dense", "--scheme", "pointerchain", "--q", "2", "--n", "0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("chainforge: ScenarioMismatch: ", 0), 0u) << r.err;
  EXPECT_EQ(cli({"simulate", "--config", "/nonexistent.cfg"}).code, 2);
  EXPECT_NE(cli({"simulate", "--scheme", "teleport"}).code, 0);
}

TEST(Cli, SimulatePresetsChangeTiming) {
  const std::vector<std::string> base{"simulate", "--scenario", "linear", "--scheme", "uvm", "--k", "3",
                                      "--layout", "LLinit_LLused", "--n", "600000"};
  auto p100 = base;
  p100.insert(p100.end(), {"--preset", "p100"});
  std::istringstream a(cli(base).out), b(cli(p100).out);
  const auto v = report::parse_csv(a), p = report::parse_csv(b);
  ASSERT_EQ(v.size(), 1u);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(v[0].metrics.bytes_h2d, p[0].metrics.bytes_h2d);
  // 4.8 MB of elements fits the 6 MiB L2 but spills past 4 MiB.
  EXPECT_GT(p[0].metrics.sim_kernel_us, v[0].metrics.sim_kernel_us);
}

TEST(Cli, SweepThenReport) {
  const auto dir = scratch("sweep");
  {
    std::ofstream grid(dir / "grid.cfg");
    grid << "linear.k = 2,3\nlinear.n = 100\nlinear.layouts = LLinit_LLused\nschemes = uvm,marshalling,pointerchain\n";
  }
  const auto csv = (dir / "out.csv").string();
  const auto s = cli({"sweep", "--grid", (dir / "grid.cfg").string(), "--out", csv, "--jobs", "2"});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(s.out, "wrote 6 rows to " + csv + "\n");
  const auto r = cli({"report", "--in", csv, "--normalize", "uvm", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const auto rows = report::parse_csv(in);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& row : rows) {
    ASSERT_TRUE(row.normalized_wall.has_value());
    if (row.metrics.scheme == TransferScheme::uvm) {
      EXPECT_EQ(*row.normalized_wall, 1.0);
    }
  }
  const auto table = cli({"report", "--in", csv});
  EXPECT_EQ(table.code, 0);
  EXPECT_NE(table.out.find("pointerchain"), std::string::npos);
  EXPECT_EQ(cli({"report", "--in", csv, "--normalize", "naive"}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, GenerateThenTransform) {
  const auto dir = scratch("gen");
  const auto g = cli({"generate", "--max-k", "3", "--out", dir.string()});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_EQ(std::count(g.out.begin(), g.out.end(), '\n'), 18);
  const auto t = cli({"transform", dir.string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(std::count(t.out.begin(), t.out.end(), '\n'), 18);
  EXPECT_TRUE(fs::exists(dir / "linear_k3_pointerchain_allinit_allused.pc.cpp"));
  EXPECT_EQ(cli({"transform", (dir / "missing.cpp").string()}).code, 1);
  fs::remove_all(dir);
}
