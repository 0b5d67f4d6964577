// vemfacet command line: studies, mesh generation/checks and single reconstructions.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include <vemfacet/errors.hpp>
#include <vemfacet/mesh.hpp>
#include <vemfacet/oracle.hpp>
#include <vemfacet/report.hpp>
#include <vemfacet/spaces.hpp>
#include <vemfacet/studies.hpp>
#include <vemfacet/submesh.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace vemfacet;

namespace
{
  constexpr int exit_ok = 0;
  constexpr int exit_validation = 2;
  constexpr int exit_numerical = 3;

  /// Artifacts written so far; removed again unless commit() is reached.
  class OutputDir
  {
  public:
    explicit OutputDir(fs::path dir) : m_dir(std::move(dir))
    {
      if (fs::exists(m_dir)) {
        if (!fs::is_directory(m_dir)) {
          throw ValidationError("output path '" + m_dir.string() + "' is not a directory");
        }
        clear_previous_run();
      } else {
        fs::create_directories(m_dir);
        m_created = true;
      }
    }

    ~OutputDir()
    {
      if (!m_committed) {
        rollback();
      }
    }

    void write(const std::string & rel, const std::string & content)
    {
      const fs::path p = m_dir / rel;
      if (!fs::exists(p.parent_path())) {
        fs::create_directories(p.parent_path());
        m_dirs.push_back(p.parent_path());
      }
      const fs::path tmp = p.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary);
        out << content;
        if (!out) {
          throw std::runtime_error("cannot write " + p.string());
        }
      }
      fs::rename(tmp, p);
      m_files.push_back(rel);
    }

    const std::vector<std::string> & files() const { return m_files; }
    const fs::path & path() const { return m_dir; }

    /// The manifest is the completion marker: written last, then nothing is rolled back.
    void commit(json manifest)
    {
      json artifacts = json::array();
      for (const auto & f : m_files) {
        artifacts.push_back(f);
      }
      manifest["artifacts"] = artifacts;
      write("manifest.json", manifest.dump(2) + "\n");
      m_committed = true;
    }

  private:
    void clear_previous_run()
    {
      const fs::path manifest = m_dir / "manifest.json";
      std::vector<fs::path> known;
      if (fs::exists(manifest)) {
        std::ifstream in(manifest);
        try {
          const json previous = json::parse(in);
          for (const auto & a : previous.at("artifacts")) {
            known.push_back(m_dir / a.get<std::string>());
          }
        } catch (const std::exception &) {
          throw ValidationError("output directory '" + m_dir.string() + "' has an unreadable manifest.json");
        }
        known.push_back(manifest);
      }
      for (const auto & p : known) {
        fs::remove(p);
      }
      for (const char * sub : {"tables", "plots"}) {
        if (fs::is_directory(m_dir / sub) && fs::is_empty(m_dir / sub)) {
          fs::remove(m_dir / sub);
        }
      }
      if (!fs::is_empty(m_dir)) {
        throw ValidationError("output directory '" + m_dir.string() + "' contains files not written by vemfacet");
      }
    }

    void rollback() noexcept
    {
      std::error_code ec;
      for (const auto & f : m_files) {
        fs::remove(m_dir / f, ec);
        fs::remove(m_dir / (f + ".tmp"), ec);
      }
      for (auto it = m_dirs.rbegin(); it != m_dirs.rend(); ++it) {
        fs::remove(*it, ec);
      }
      if (m_created) {
        fs::remove(m_dir, ec);
      }
    }

    fs::path m_dir;
    bool m_created = false;
    bool m_committed = false;
    std::vector<std::string> m_files;
    std::vector<fs::path> m_dirs;
  };

  struct GlobalFlags
  {
    std::string out;
    unsigned threads = 0;
    std::uint64_t seed = 0;
    int oracle_level = 0;
    CLI::Option * out_opt = nullptr;
    CLI::Option * threads_opt = nullptr;
    CLI::Option * seed_opt = nullptr;
    CLI::Option * level_opt = nullptr;
  };

  bool given(const CLI::Option * o) { return o->count() > 0; }

  std::string safe_name(std::string s)
  {
    for (char & c : s) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
        c = '_';
      }
    }
    return s;
  }

  std::string read_file(const std::string & path)
  {
    std::ifstream in(path);
    if (!in) {
      throw ValidationError("cannot open '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run_studies(const std::string & config_path, const GlobalFlags & flags)
  {
    StudyFile file = load_study_file(config_path);
    for (auto & cfg : file.studies) {
      if (given(flags.seed_opt)) {
        cfg.seed = flags.seed;
      }
      if (given(flags.level_opt)) {
        cfg.oracle_level = flags.oracle_level;
      }
      if (given(flags.threads_opt)) {
        cfg.threads = flags.threads;
      }
      cfg.validate();
    }
    const std::string out = given(flags.out_opt) ? flags.out : file.run.out.value_or("out");
    OutputDir dir(out);

    std::vector<StudyReport> reports;
    json timings = json::array();
    for (const auto & cfg : file.studies) {
      const auto t0 = std::chrono::steady_clock::now();
      Oracle oracle; // per study, so every report depends on its own config only
      reports.push_back(run_study(cfg, oracle));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      timings.push_back({{"name", cfg.name}, {"kind", to_string(cfg.kind)}, {"wall_clock_seconds", secs}});
      std::cerr << "vemfacet: study " << cfg.name << " (" << to_string(cfg.kind) << ") finished in " << secs
                << " s\n";
      for (const auto & t : reports.back().tables) {
        const std::string stem = safe_name(cfg.name + "_" + t.name);
        dir.write("tables/" + stem + ".csv", table_csv(t));
        dir.write("plots/" + stem + ".svg", table_svg(t, cfg.name + ": " + t.name));
      }
    }
    dir.write("report.json", report_json(reports));
    dir.commit({{"tool", "vemfacet"},
                {"version", tool_version},
                {"config", fs::absolute(config_path).string()},
                {"output_directory", fs::absolute(dir.path()).string()},
                {"studies", timings}});
    return exit_ok;
  }

  int mesh_gen(const std::string & family, const std::string & h_text, const std::string & path, double jitter,
               std::uint64_t mesh_seed, double gamma_min)
  {
    FamilySpec spec;
    spec.family = family;
    spec.jitter = jitter;
    spec.seed = mesh_seed;
    spec.gamma_min = gamma_min;
    const double h = parse_real(h_text);
    const PolytopalMesh mesh = generate_mesh(spec, h);
    if (path.empty() || path == "-") {
      std::cout << format_mesh(mesh);
    } else {
      save_mesh(mesh, path);
    }
    return exit_ok;
  }

  int mesh_check(const std::string & path)
  {
    const PolytopalMesh mesh = load_mesh(path);
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
      subtessellate(mesh, c, 0); // star-shapedness w.r.t. the barycenter
    }
    const RegularityMetrics m = regularity_report(mesh);
    const json out = {{"file", path},
                      {"dimension", mesh.dimension()},
                      {"vertices", mesh.n_vertices()},
                      {"edges", mesh.n_edges()},
                      {"faces", mesh.n_faces()},
                      {"cells", mesh.n_cells()},
                      {"max_diameter", m.max_diameter},
                      {"min_gamma", m.min_gamma},
                      {"min_face_ratio", m.min_face_ratio},
                      {"min_edge_ratio", m.min_edge_ratio},
                      {"max_face_count", m.max_face_count},
                      {"max_face_edges", m.max_face_edges},
                      {"flagged_cells", m.flagged}};
    std::cout << out.dump(2) << "\n";
    return exit_ok;
  }

  DofVector read_dofs(const std::string & path, SpaceTag space, std::size_t cell, const ElementGeometry & g)
  {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::parse_error & e) {
      throw ParseError("DOF file '" + path + "': " + e.what());
    }
    const json & values = j.is_object() ? j.at("values") : j;
    if (!values.is_array()) {
      throw ParseError("DOF file '" + path + "': expected an array of numbers");
    }
    DofVector d{space, cell, Eigen::VectorXd(values.size())};
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!values[i].is_number()) {
        throw ParseError("DOF file '" + path + "': entry " + std::to_string(i) + " is not a number");
      }
      d.values(i) = values[i].get<double>();
    }
    if (std::size_t(d.values.size()) != dof_count(space, g)) {
      throw ValidationError("DOF file '" + path + "' has " + std::to_string(d.values.size()) + " values, "
                            + to_string(space) + " on cell " + std::to_string(cell) + " needs "
                            + std::to_string(dof_count(space, g)));
    }
    return d;
  }

  json vec_json(const Eigen::VectorXd & v)
  {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      a.push_back(v(i));
    }
    return a;
  }

  int reconstruct_cmd(const std::string & mesh_path, std::size_t cell, const std::string & space_name,
                      const std::string & dof_path, const GlobalFlags & flags)
  {
    const PolytopalMesh mesh = load_mesh(mesh_path);
    if (cell >= mesh.n_cells()) {
      throw ValidationError("cell " + std::to_string(cell) + " out of range (mesh has "
                            + std::to_string(mesh.n_cells()) + " cells)");
    }
    const SpaceTag space = parse_space(space_name);
    const ElementGeometry g = geometry(mesh, cell);
    if (space_dimension(space) != g.dimension) {
      throw ValidationError("space " + to_string(space) + " does not fit a " + std::to_string(g.dimension)
                            + "D mesh");
    }
    const DofVector d = read_dofs(dof_path, space, cell, g);
    const int level = given(flags.level_opt) ? flags.oracle_level : 2;
    const SubmeshField f = reconstruct(d, g, level, level > 0);

    json out = {{"space", to_string(space)}, {"cell", cell}, {"level", level}, {"accuracy_estimate", f.accuracy}};
    out["dofs"] = vec_json(d.values);
    out["reextracted_dofs"] = vec_json(reextract_dofs(f, g).values);
    if (is_face_space(space)) {
      out["div_constant"] = div_constant(d, g);
    } else if (space == SpaceTag::Edge2D) {
      out["rot_constant"] = rot_constant(d, g);
    } else {
      out["curl_image"] = vec_json(curl_image(d, g).values);
    }
    out["pi0"] = vec_json(pi0_ambient(d, g));
    out["pi0_oracle"] = vec_json(f.integral() / g.measure);
    out["l2_norm"] = l2_norm(f);
    out["constraint_moments"] = vec_json(constraint_moments(f, g));
    json nodes = json::array(), simplices = json::array(), values = json::array(), grads = json::array();
    for (const auto & x : f.submesh->nodes) {
      nodes.push_back(vec_json(x));
    }
    for (std::size_t s = 0; s < f.submesh->n_simplices(); ++s) {
      json t = json::array();
      for (std::size_t k = 0; k < f.submesh->vertices_per_simplex(); ++k) {
        t.push_back(f.submesh->simplices[s][k]);
      }
      simplices.push_back(t);
      values.push_back(vec_json(f.value[s]));
      json G = json::array();
      for (int r = 0; r < 3; ++r) {
        G.push_back(vec_json(f.gradient[s].row(r).transpose()));
      }
      grads.push_back(G);
    }
    out["field"] = {{"representation", "affine per simplex: v(x) = value + gradient (x - centroid)"},
                    {"nodes", nodes},
                    {"simplices", simplices},
                    {"value_at_centroid", values},
                    {"gradient", grads}};

    if (!given(flags.out_opt)) {
      std::cout << out.dump(2) << "\n";
      return exit_ok;
    }
    OutputDir dir(flags.out);
    dir.write("field.json", out.dump(2) + "\n");
    dir.commit({{"tool", "vemfacet"},
                {"version", tool_version},
                {"mesh", fs::absolute(mesh_path).string()},
                {"output_directory", fs::absolute(dir.path()).string()}});
    return exit_ok;
  }

  int fail(const char * kind, const std::string & message, int code)
  {
    std::string m = message;
    for (char & c : m) {
      if (c == '\n') {
        c = ' ';
      }
    }
    std::cerr << "vemfacet: error[" << kind << "]: " << m << "\n";
    return code;
  }
} // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Lowest-order face and edge virtual element spaces: studies and diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", tool_version);

  GlobalFlags flags;
  flags.out_opt = app.add_option("--out", flags.out, "Output directory")->envname("VEMFACET_OUT");
  flags.threads_opt =
    app.add_option("--threads", flags.threads, "Worker threads (0: available parallelism)")->envname("VEMFACET_THREADS");
  flags.seed_opt = app.add_option("--seed", flags.seed, "Random seed for all studies")->envname("VEMFACET_SEED");
  flags.level_opt = app.add_option("--oracle-level", flags.oracle_level, "Oracle refinement level")
                      ->envname("VEMFACET_ORACLE_LEVEL")
                      ->check(CLI::Range(0, 5));

  std::string config;
  auto * study = app.add_subcommand("study", "Run the studies of a config file");
  study->add_option("config", config, "Study config file")->required();

  auto * mesh = app.add_subcommand("mesh", "Mesh utilities");
  mesh->require_subcommand(1);
  std::string family, h_text, gen_path;
  double jitter = 0.2, gamma_min = 0.3;
  std::uint64_t mesh_seed = 7;
  auto * gen = mesh->add_subcommand("gen", "Generate a mesh of a built-in family");
  gen->add_option("family", family, "squares | distorted-quads | hexagons | cubes | distorted-hexes")->required();
  gen->add_option("spacing", h_text, "Nominal spacing, e.g. 0.25 or 1/4")->required();
  gen->add_option("file", gen_path, "Output mesh file (default: stdout)");
  gen->add_option("--jitter", jitter, "Vertex jitter relative to h");
  gen->add_option("--mesh-seed", mesh_seed, "Seed of the jitter");
  gen->add_option("--gamma-min", gamma_min, "Minimum accepted star-shapedness ratio");
  std::string check_path;
  auto * check = mesh->add_subcommand("check", "Validate a mesh file and print regularity metrics");
  check->add_option("file", check_path, "Mesh file")->required();

  std::string rec_mesh, rec_space, rec_dofs;
  std::size_t rec_cell = 0;
  auto * rec = app.add_subcommand("reconstruct", "Dump the oracle reconstruction of one virtual function");
  rec->add_option("mesh", rec_mesh, "Mesh file")->required();
  rec->add_option("cell", rec_cell, "Cell id")->required();
  rec->add_option("space", rec_space, "face2d | edge2d | face3d | edge3d")->required();
  rec->add_option("dofs", rec_dofs, "JSON file: array of DOF values or {\"values\": [...]}")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    if (study->parsed()) {
      return run_studies(config, flags);
    }
    if (gen->parsed()) {
      return mesh_gen(family, h_text, gen_path, jitter, mesh_seed, gamma_min);
    }
    if (check->parsed()) {
      return mesh_check(check_path);
    }
    if (rec->parsed()) {
      return reconstruct_cmd(rec_mesh, rec_cell, rec_space, rec_dofs, flags);
    }
  } catch (const ParseError & e) {
    return fail("parse", e.what(), exit_validation);
  } catch (const ValidationError & e) {
    return fail("validation", e.what(), exit_validation);
  } catch (const std::invalid_argument & e) {
    return fail("validation", e.what(), exit_validation);
  } catch (const NumericalError & e) {
    return fail("numerical", e.what(), exit_numerical);
  } catch (const std::exception & e) {
    return fail("internal", e.what(), 1);
  }
  return exit_ok;
}
