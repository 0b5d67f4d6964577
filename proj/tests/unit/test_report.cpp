#include <gtest/gtest.h>

#include <json.hpp>

#include <vemfacet/errors.hpp>
#include <vemfacet/report.hpp>

using namespace vemfacet;

namespace
{
  const char * sample = R"(# comment
[run]
seed = 3
oracle_level = 2

[rates]
kind = convergence
spaces = edge2d, face2d
family = squares
h = 1/4, 0.125
fields = trig
)";
} // namespace

TEST(StudyFile, Parse)
{
  const auto f = parse_study_file(sample);
  EXPECT_EQ(f.run.seed, 3u);
  EXPECT_EQ(f.run.oracle_level, 2);
  ASSERT_EQ(f.studies.size(), 1u);
  const auto & s = f.studies[0];
  EXPECT_EQ(s.name, "rates");
  EXPECT_EQ(s.kind, StudyKind::convergence);
  ASSERT_EQ(s.spaces.size(), 2u);
  EXPECT_EQ(s.spaces[1], SpaceTag::Face2D);
  ASSERT_EQ(s.mesh.h.size(), 2u);
  EXPECT_EQ(s.mesh.h[0], 0.25);
  EXPECT_EQ(s.mesh.h[1], 0.125);
}

TEST(StudyFile, Errors)
{
  EXPECT_THROW(parse_study_file("[a]\nkind = convergence\nspaces = edge2d\nfamily = squares\nh = 1/2\nfields = trig\n"
                                "colour = blue\n"),
               ValidationError);
  EXPECT_THROW(parse_study_file("[a\nkind = x\n"), ParseError);
  EXPECT_THROW(parse_study_file("[a]\nkind = convergence\nspaces = edge2d\nfamily = squares\nh = 1/4, 1/2\n"
                                "fields = trig\n"),
               ValidationError);
  EXPECT_THROW(parse_real("1/0"), ValidationError);
  EXPECT_THROW(parse_real("abc"), ValidationError);
  EXPECT_EQ(parse_real("1/3"), 1.0 / 3.0);
}

TEST(StudyFile, EchoRoundTrip)
{
  auto s = parse_study_file(sample).studies[0];
  s.mesh.h = {1.0 / 3.0, 0.1};
  s.mesh.jitter = 0.15;
  const std::string text = format_study(s);
  const auto back = parse_study_file(text).studies.at(0);
  EXPECT_EQ(format_study(back), text);
  EXPECT_EQ(back.mesh.h, s.mesh.h);
  EXPECT_EQ(back.mesh.jitter, s.mesh.jitter);
}

TEST(FormatReal, ShortestRoundTrip)
{
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(std::stod(format_real(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Tables, CsvAndSvg)
{
  StudyTable t{"edge2d_trig", {{0.5, "l2_error", 0.1, 0.001}, {0.25, "l2_error", 0.05, 0.0005}}};
  const std::string csv = table_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "h,quantity,value,accuracy_estimate");
  EXPECT_NE(csv.find("0.25,l2_error,0.05,"), std::string::npos);
  const std::string svg = table_svg(t, "edge2d_trig");
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0, true);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Report, JsonHasEchoAndNoTimings)
{
  StudyReport r;
  r.config = parse_study_file(sample).studies[0];
  r.meshes.push_back({0.25, 0.35, 16, 0.5});
  r.tables.push_back({"edge2d_trig", {{0.25, "l2_error", 0.1, 0.0}}});
  r.summary.emplace_back("edge2d_trig.l2_error.max", 0.1);
  const auto j = nlohmann::json::parse(report_json({r}));
  EXPECT_EQ(j.at("tool"), "vemfacet");
  const auto & s = j.at("studies").at(0);
  EXPECT_EQ(s.at("config").at("echo").get<std::string>(), format_study(r.config));
  EXPECT_EQ(report_json({r}).find("time"), std::string::npos);
}
