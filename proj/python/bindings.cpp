#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <vemfacet/errors.hpp>
#include <vemfacet/mesh.hpp>
#include <vemfacet/oracle.hpp>
#include <vemfacet/report.hpp>
#include <vemfacet/spaces.hpp>
#include <vemfacet/studies.hpp>

namespace py = pybind11;
using namespace vemfacet;

namespace
{
  DofVector dofs(SpaceTag space, const ElementGeometry & g, const Eigen::VectorXd & values)
  {
    if (std::size_t(values.size()) != dof_count(space, g)) {
      throw ValidationError(to_string(space) + " on cell " + std::to_string(g.cell) + " takes "
                            + std::to_string(dof_count(space, g)) + " DOFs, got " + std::to_string(values.size()));
    }
    return {space, g.cell, values};
  }

  // Python callable x -> 3-vector; no derivative callbacks, so only DOF extraction uses it.
  AnalyticField python_field(py::function f, int dimension)
  {
    AnalyticField a;
    a.name = "python";
    a.dimension = dimension;
    a.value = [f](const Eigen::Vector3d & x) {
      py::gil_scoped_acquire gil;
      Eigen::Vector3d v = Eigen::Vector3d::Zero();
      const auto r = f(x).cast<Eigen::VectorXd>();
      v.head(std::min<Eigen::Index>(3, r.size())) = r.head(std::min<Eigen::Index>(3, r.size()));
      return v;
    };
    return a;
  }
} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Lowest-order face and edge virtual element spaces";
  m.attr("__version__") = tool_version;

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::enum_<SpaceTag>(m, "SpaceTag")
    .value("Face2D", SpaceTag::Face2D)
    .value("Edge2D", SpaceTag::Edge2D)
    .value("Face3D", SpaceTag::Face3D)
    .value("Edge3D", SpaceTag::Edge3D);
  m.def("parse_space", &parse_space);

  py::class_<PolytopalMesh>(m, "Mesh")
    .def_property_readonly("dimension", &PolytopalMesh::dimension)
    .def_property_readonly("n_vertices", &PolytopalMesh::n_vertices)
    .def_property_readonly("n_edges", &PolytopalMesh::n_edges)
    .def_property_readonly("n_faces", &PolytopalMesh::n_faces)
    .def_property_readonly("n_cells", &PolytopalMesh::n_cells)
    .def("vertex", &PolytopalMesh::vertex)
    .def("edge", &PolytopalMesh::edge)
    .def("__repr__", [](const PolytopalMesh & mesh) {
      return "<Mesh " + std::to_string(mesh.dimension()) + "D, " + std::to_string(mesh.n_cells()) + " cells>";
    });
  m.def("load_mesh", &load_mesh, py::arg("path"));
  m.def("parse_mesh", &parse_mesh, py::arg("text"));
  m.def("format_mesh", &format_mesh, py::arg("mesh"));
  m.def(
    "generate_mesh",
    [](const std::string & family, double h, double jitter, std::uint64_t seed, double gamma_min) {
      FamilySpec spec;
      spec.family = family;
      spec.jitter = jitter;
      spec.seed = seed;
      spec.gamma_min = gamma_min;
      return generate_mesh(spec, h);
    },
    py::arg("family"), py::arg("h"), py::arg("jitter") = 0.2, py::arg("seed") = 7, py::arg("gamma_min") = 0.3);
  m.def(
    "regularity",
    [](const PolytopalMesh & mesh, double threshold) {
      const auto r = regularity_report(mesh, threshold);
      py::dict d;
      d["min_gamma"] = r.min_gamma;
      d["min_face_ratio"] = r.min_face_ratio;
      d["min_edge_ratio"] = r.min_edge_ratio;
      d["max_face_count"] = r.max_face_count;
      d["max_face_edges"] = r.max_face_edges;
      d["max_diameter"] = r.max_diameter;
      d["flagged"] = r.flagged;
      return d;
    },
    py::arg("mesh"), py::arg("gamma_threshold") = 0.1);

  py::class_<ElementGeometry>(m, "Element")
    .def_readonly("dimension", &ElementGeometry::dimension)
    .def_readonly("cell", &ElementGeometry::cell)
    .def_readonly("diameter", &ElementGeometry::diameter)
    .def_readonly("measure", &ElementGeometry::measure)
    .def_readonly("barycenter", &ElementGeometry::barycenter)
    .def_property_readonly("n_faces", [](const ElementGeometry & g) { return g.faces.size(); })
    .def_property_readonly("n_edges", [](const ElementGeometry & g) { return g.edges.size(); });
  m.def("geometry", &geometry, py::arg("mesh"), py::arg("cell"));
  m.def("dof_count", &dof_count, py::arg("space"), py::arg("element"));

  m.def(
    "extract_dofs",
    [](SpaceTag space, py::object field, const ElementGeometry & g) -> Eigen::VectorXd {
      if (py::isinstance<py::str>(field)) {
        return extract_dofs(space, builtin_field(field.cast<std::string>(), space), g).values;
      }
      return extract_dofs(space, python_field(field.cast<py::function>(), space_dimension(space)), g).values;
    },
    py::arg("space"), py::arg("field"), py::arg("element"),
    "DOFs of a built-in field (by name) or of a Python callable x -> vector.");
  m.def(
    "constant_dofs",
    [](SpaceTag space, const Eigen::Vector3d & c, const ElementGeometry & g) -> Eigen::VectorXd {
      return constant_dofs(space, c, g).values;
    },
    py::arg("space"), py::arg("c"), py::arg("element"));
  m.def("builtin_fields", &builtin_field_names);

  m.def(
    "div_constant", [](SpaceTag s, const Eigen::VectorXd & d, const ElementGeometry & g) {
      return div_constant(dofs(s, g, d), g);
    },
    py::arg("space"), py::arg("dofs"), py::arg("element"));
  m.def(
    "rot_constant",
    [](const Eigen::VectorXd & d, const ElementGeometry & g) { return rot_constant(dofs(SpaceTag::Edge2D, g, d), g); },
    py::arg("dofs"), py::arg("element"));
  m.def(
    "curl_image",
    [](const Eigen::VectorXd & d, const ElementGeometry & g) -> Eigen::VectorXd {
      return curl_image(dofs(SpaceTag::Edge3D, g, d), g).values;
    },
    py::arg("dofs"), py::arg("element"));
  m.def(
    "pi0", [](SpaceTag s, const Eigen::VectorXd & d, const ElementGeometry & g) {
      return pi0_ambient(dofs(s, g, d), g);
    },
    py::arg("space"), py::arg("dofs"), py::arg("element"), "Pi0 as an ambient 3-vector.");
  m.def(
    "stabilization",
    [](SpaceTag s, const Eigen::VectorXd & a, const Eigen::VectorXd & b, const ElementGeometry & g) {
      return stabilization(dofs(s, g, a), dofs(s, g, b), g);
    },
    py::arg("space"), py::arg("d1"), py::arg("d2"), py::arg("element"));
  m.def(
    "discrete_inner",
    [](SpaceTag s, const Eigen::VectorXd & a, const Eigen::VectorXd & b, const ElementGeometry & g) {
      return discrete_inner(dofs(s, g, a), dofs(s, g, b), g);
    },
    py::arg("space"), py::arg("d1"), py::arg("d2"), py::arg("element"));
  m.def("stabilization_matrix", &stabilization_matrix, py::arg("space"), py::arg("element"));
  m.def("discrete_inner_matrix", &discrete_inner_matrix, py::arg("space"), py::arg("element"));

  py::class_<SubmeshField>(m, "Field")
    .def_readonly("space", &SubmeshField::space)
    .def_readonly("level", &SubmeshField::level)
    .def_readonly("accuracy", &SubmeshField::accuracy)
    .def_property_readonly("n_simplices", [](const SubmeshField & f) { return f.value.size(); })
    .def("__call__", [](const SubmeshField & f, const Eigen::Vector3d & x) { return f(x); })
    .def("integral", &SubmeshField::integral)
    .def("l2_norm", [](const SubmeshField & f) { return l2_norm(f); })
    .def("distance", [](const SubmeshField & a, const SubmeshField & b) { return l2_distance(a, b); });
  m.def(
    "reconstruct",
    [](SpaceTag s, const Eigen::VectorXd & d, const ElementGeometry & g, int level, bool estimate) {
      py::gil_scoped_release nogil;
      return reconstruct(dofs(s, g, d), g, level, estimate);
    },
    py::arg("space"), py::arg("dofs"), py::arg("element"), py::arg("level") = 2, py::arg("estimate") = true);
  m.def(
    "reextract_dofs",
    [](const SubmeshField & f, const ElementGeometry & g) -> Eigen::VectorXd { return reextract_dofs(f, g).values; },
    py::arg("field"), py::arg("element"));
  m.def(
    "gram_matrix",
    [](SpaceTag s, const ElementGeometry & g, int level) {
      py::gil_scoped_release nogil;
      const GramMatrix G = gram_matrix(s, g, level, true);
      return std::make_pair(G.matrix, G.accuracy);
    },
    py::arg("space"), py::arg("element"), py::arg("level") = 2, "Returns (matrix, accuracy estimate).");

  m.def("format_study", [](const std::string & text) {
    std::string out;
    for (const auto & c : parse_study_file(text).studies) {
      out += format_study(c) + "\n";
    }
    return out;
  }, py::arg("config_text"), "Normalised config text (the echo stored in reports).");
  m.def(
    "run_studies_json",
    [](const std::string & text, std::optional<std::uint64_t> seed, std::optional<int> level, unsigned threads) {
      StudyFile file = parse_study_file(text);
      std::vector<StudyReport> reports;
      py::gil_scoped_release nogil;
      for (auto & c : file.studies) {
        if (seed) {
          c.seed = *seed;
        }
        if (level) {
          c.oracle_level = *level;
        }
        c.threads = threads;
        reports.push_back(run_study(c));
      }
      return report_json(reports);
    },
    py::arg("config_text"), py::arg("seed") = py::none(), py::arg("oracle_level") = py::none(),
    py::arg("threads") = 0);
}
