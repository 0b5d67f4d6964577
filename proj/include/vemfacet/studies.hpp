#ifndef VEMFACET_STUDIES_HPP
#define VEMFACET_STUDIES_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <vemfacet/calculus.hpp>
#include <vemfacet/mesh.hpp>
#include <vemfacet/oracle.hpp>
#include <vemfacet/spaces.hpp>

namespace vemfacet
{

  enum class StudyKind
  {
    convergence,
    stability,
    exactness,
    apriori,
    inverse_probe
  };

  std::string to_string(StudyKind kind);
  /// "convergence", "stability", "exactness", "apriori", "inverse-probe". Throws ValidationError.
  StudyKind parse_study_kind(const std::string & name);

  struct StudyConfig
  {
    std::string name = "study";
    StudyKind kind = StudyKind::convergence;
    std::vector<SpaceTag> spaces;
    FamilySpec mesh;
    /// Built-in field names (see builtin_field).
    std::vector<std::string> fields;
    int oracle_level = 2;
    std::uint64_t seed = 1;
    /// Random DOF directions per element.
    int samples = 64;
    /// Random Edge3D DOF vectors for the div-curl check (spread over the elements).
    int random_vectors = 1000;
    /// Maximum accuracy-estimate / value ratio for a point to enter a slope fit.
    double admissibility = 0.1;
    unsigned threads = 0;

    /// Throws ValidationError on inconsistent settings.
    void validate() const;
  };

  /// Built-in test fields on the unit square / cube.
  ///
  ///  - "constant": (0.3, -0.2, 0.5) (third component dropped in 2D);
  ///  - "poly": a member of the space's polynomial family (RT / Nedelec type linears);
  ///  - "trig": generic smooth field with nonzero div and curl;
  ///  - "trig-yz": (sin pi y sin pi z, 0, 0) (3D); "trig-b": (sin pi y, sin pi x) (2D).
  AnalyticField builtin_field(const std::string & name, SpaceTag space);
  std::vector<std::string> builtin_field_names();

  struct TableRow
  {
    double h;
    std::string quantity;
    double value;
    double accuracy; ///< oracle accuracy estimate (0 for exactly computed quantities)
  };

  struct StudyTable
  {
    std::string name;
    std::vector<TableRow> rows;
  };

  struct SlopeFit
  {
    std::string table;
    std::string quantity;
    double slope;    ///< NaN when inconclusive
    double residual; ///< RMS residual of the log-log fit
    std::size_t points;
    std::size_t admissible;
    bool conclusive;
    double slope_all; ///< fit over all points, for reference
  };

  struct MeshRecord
  {
    double h;     ///< nominal spacing
    double h_max; ///< largest element diameter
    std::size_t cells;
    double min_gamma;
  };

  struct StudyReport
  {
    StudyConfig config;
    std::vector<MeshRecord> meshes;
    std::vector<StudyTable> tables;
    std::vector<SlopeFit> slopes;
    /// Named scalar outcomes in insertion order (verdict inputs).
    std::vector<std::pair<std::string, double>> summary;

    /// Throws std::out_of_range for unknown keys.
    double value(const std::string & key) const;
    const StudyTable & table(const std::string & name) const;
  };

  /// Least-squares slope of log(value) against log(h). Returns {slope, rms residual}.
  std::pair<double, double> fit_slope(const std::vector<double> & h, const std::vector<double> & value);

  /// Per-element random generator seed: a hash of (seed, element id).
  std::uint64_t element_seed(std::uint64_t seed, std::uint64_t element);

  /// Generalized eigenvalues of A x = lambda B x (B SPD), ascending. Throws NumericalError if B is
  /// not positive definite.
  Eigen::VectorXd generalized_eigenvalues(const Eigen::MatrixXd & A, const Eigen::MatrixXd & B,
                                          const std::string & what = "Gram matrix");

  StudyReport run_convergence(const StudyConfig & cfg, Oracle & oracle);
  StudyReport run_stability(const StudyConfig & cfg, Oracle & oracle);
  StudyReport run_exactness(const StudyConfig & cfg);
  StudyReport run_apriori(const StudyConfig & cfg, Oracle & oracle);
  StudyReport run_inverse_probe(const StudyConfig & cfg, Oracle & oracle);
  /// Dispatches on cfg.kind (validates first).
  StudyReport run_study(const StudyConfig & cfg, Oracle & oracle);
  StudyReport run_study(const StudyConfig & cfg);

} // namespace vemfacet

#endif
