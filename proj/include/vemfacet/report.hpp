#ifndef VEMFACET_REPORT_HPP
#define VEMFACET_REPORT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <vemfacet/studies.hpp>

namespace vemfacet
{

  inline constexpr const char * tool_version = "0.3.0";

  /// Run-wide settings from the [run] section; unset values leave the per-study ones alone.
  struct RunSettings
  {
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::optional<int> oracle_level;
    std::optional<std::string> out;
  };

  struct StudyFile
  {
    RunSettings run;
    std::vector<StudyConfig> studies;
  };

  /// Study config text: INI-style sections, one per study, plus an optional [run] section.
  ///
  ///   [run]
  ///   seed = 3
  ///
  ///   [edge2d-rates]
  ///   kind = convergence
  ///   spaces = edge2d, face2d
  ///   family = squares
  ///   h = 1/4, 1/8, 1/16, 1/32
  ///   fields = trig
  ///
  /// Throws ParseError on malformed text, ValidationError on bad values or unknown keys.
  StudyFile parse_study_file(const std::string & text);
  StudyFile load_study_file(const std::string & path);

  /// One section reproducing the config exactly (full precision); parse_study_file inverts it.
  std::string format_study(const StudyConfig & cfg);

  /// Reads "0.25" or "1/4". Throws ValidationError.
  double parse_real(const std::string & text);

  /// report.json: tool metadata plus one entry per study (config echo, meshes, tables, slopes,
  /// summary). Contains no timings, so identical inputs give identical bytes.
  std::string report_json(const std::vector<StudyReport> & reports);

  /// Columns h, quantity, value, accuracy_estimate.
  std::string table_csv(const StudyTable & table);

  /// Log-log plot of every quantity of a table against h.
  std::string table_svg(const StudyTable & table, const std::string & title);

  /// Shortest text that reads back to the same double.
  std::string format_real(double x);

} // namespace vemfacet

#endif
