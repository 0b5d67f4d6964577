#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "test_helpers.hpp"

namespace fs = std::filesystem;

namespace
{
  struct Result
  {
    int status;
    std::string out;
  };

  Result run(const std::string & args, const std::string & env = "")
  {
    const std::string cmd = env + " " + std::string(VEMFACET_CLI) + " " + args + " 2>&1";
    FILE * p = popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) {
      out.append(buf, n);
    }
    const int st = pclose(p);
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
  }

  std::string slurp(const fs::path & p)
  {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path scratch(const std::string & name)
  {
    const fs::path d = fs::temp_directory_path() / ("vemfacet_cli_" + name);
    fs::remove_all(d);
    return d;
  }

  fs::path write_file(const fs::path & p, const std::string & text)
  {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
    return p;
  }

  const char * quick = "[rates]\nkind = convergence\nspaces = edge2d\nfamily = squares\nh = 1/2, 1/4\n"
                       "fields = trig\noracle_level = 1\n";
} // namespace

TEST(Cli, StudyWritesArtifacts)
{
  const fs::path d = scratch("study");
  const fs::path cfg = write_file(d / "cfg.ini", quick);
  const auto r = run("study " + cfg.string() + " --out " + (d / "out").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_TRUE(fs::exists(d / "out/report.json"));
  EXPECT_TRUE(fs::exists(d / "out/tables/rates_edge2d_trig.csv"));
  EXPECT_TRUE(fs::exists(d / "out/plots/rates_edge2d_trig.svg"));
  const auto manifest = nlohmann::json::parse(slurp(d / "out/manifest.json"));
  EXPECT_FALSE(manifest.at("artifacts").empty());

  // same seed, different thread count: identical report
  const std::string first = slurp(d / "out/report.json");
  ASSERT_EQ(run("study " + cfg.string() + " --threads 2 --out " + (d / "out2").string()).status, 0);
  EXPECT_EQ(first, slurp(d / "out2/report.json"));
  fs::remove_all(d);
}

TEST(Cli, EnvironmentAndFlagPrecedence)
{
  const fs::path d = scratch("env");
  const fs::path cfg = write_file(d / "cfg.ini", quick);
  ASSERT_EQ(run("study " + cfg.string(), "VEMFACET_OUT=" + (d / "a").string() + " VEMFACET_SEED=17").status, 0);
  EXPECT_NE(slurp(d / "a/report.json").find("seed = 17"), std::string::npos);
  ASSERT_EQ(run("study " + cfg.string() + " --seed 5", "VEMFACET_OUT=" + (d / "b").string() + " VEMFACET_SEED=17")
              .status,
            0);
  EXPECT_NE(slurp(d / "b/report.json").find("seed = 5"), std::string::npos);
  fs::remove_all(d);
}

TEST(Cli, ValidationFailuresExitTwo)
{
  const fs::path d = scratch("bad");
  const fs::path cfg = write_file(d / "cfg.ini", "[x]\nkind = convergence\nspaces = edge2d\nfamily = moons\n"
                                                 "h = 1/2\nfields = trig\n");
  const auto r = run("study " + cfg.string() + " --out " + (d / "out").string());
  EXPECT_EQ(r.status, 2) << r.out;
  EXPECT_NE(r.out.find("vemfacet: error["), std::string::npos);
  EXPECT_FALSE(fs::exists(d / "out/report.json"));

  const auto m = run("mesh check " + data_file("bad_cube.msh"));
  EXPECT_EQ(m.status, 2);
  EXPECT_NE(m.out.find("face 3"), std::string::npos) << m.out;

  EXPECT_EQ(run("reconstruct").status, 2);
  const fs::path dofs = write_file(d / "dofs.json", "[1, 2, 3]");
  EXPECT_EQ(run("reconstruct " + data_file("unit_square.msh") + " 0 edge2d " + dofs.string()).status, 2);
  fs::remove_all(d);
}

TEST(Cli, MeshGenAndCheck)
{
  const fs::path d = scratch("mesh");
  fs::create_directories(d);
  ASSERT_EQ(run("mesh gen hexagons 1/4 " + (d / "h.msh").string()).status, 0);
  const auto r = run("mesh check " + (d / "h.msh").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NO_THROW(nlohmann::json::parse(r.out));
  fs::remove_all(d);
}

TEST(Cli, ReconstructRotationField)
{
  const fs::path d = scratch("rec");
  const fs::path dofs = write_file(d / "dofs.json", "{\"values\": [0.5, 0.5, 0.5, 0.5]}");
  const auto r = run("reconstruct " + data_file("unit_square.msh") + " 0 edge2d " + dofs.string() +
                     " --oracle-level 2 --out " + (d / "rec").string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(d / "rec/field.json"));
  EXPECT_NEAR(j.at("l2_norm").get<double>(), 1.0 / std::sqrt(6.0), 1e-10);
  EXPECT_NEAR(j.at("rot_constant").get<double>(), 2.0, 1e-14);
  fs::remove_all(d);
}
