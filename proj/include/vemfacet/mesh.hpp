#ifndef VEMFACET_MESH_HPP
#define VEMFACET_MESH_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vemfacet
{

  /// Relative planarity tolerance for 3D faces (max distance to best-fit plane over h_F).
  inline constexpr double tol_planar = 1e-9;

  /// Polygonal (2D) or polyhedral (3D) mesh.
  ///
  /// Vertices are stored as 3-vectors (z = 0 in 2D). In 2D the cells are counterclockwise
  /// vertex loops and faces coincide with edges; in 3D the faces are vertex loops and the cells
  /// reference faces with a +-1 sign telling whether the loop normal points out of the cell.
  /// The global edge tangent runs from the lower to the higher vertex id.
  class PolytopalMesh
  {
  public:
    struct OrientedFace
    {
      std::size_t face;
      int sign;
    };

    PolytopalMesh() = default;

    /// 2D mesh; edges are collected from the cell loops unless given explicitly.
    static PolytopalMesh make_2d(std::vector<Eigen::Vector3d> vertices,
                                 std::vector<std::vector<std::size_t>> cells,
                                 std::vector<std::array<std::size_t, 2>> edges = {});

    /// 3D mesh; edges are collected from the face loops unless given explicitly.
    static PolytopalMesh make_3d(std::vector<Eigen::Vector3d> vertices,
                                 std::vector<std::vector<std::size_t>> faces,
                                 std::vector<std::vector<OrientedFace>> cells,
                                 std::vector<std::array<std::size_t, 2>> edges = {});

    int dimension() const { return m_dim; }
    std::size_t n_vertices() const { return m_vertices.size(); }
    std::size_t n_edges() const { return m_edges.size(); }
    /// In 2D faces are edges.
    std::size_t n_faces() const { return m_dim == 2 ? m_edges.size() : m_faces.size(); }
    std::size_t n_cells() const { return m_dim == 2 ? m_cell_loops.size() : m_cell_faces.size(); }

    const Eigen::Vector3d & vertex(std::size_t i) const { return m_vertices.at(i); }
    const std::vector<Eigen::Vector3d> & vertices() const { return m_vertices; }
    const std::array<std::size_t, 2> & edge(std::size_t i) const { return m_edges.at(i); }
    const std::vector<std::array<std::size_t, 2>> & edges() const { return m_edges; }
    const std::vector<std::size_t> & face_loop(std::size_t i) const { return m_faces.at(i); }
    const std::vector<std::vector<std::size_t>> & faces() const { return m_faces; }
    /// 2D only.
    const std::vector<std::size_t> & cell_loop(std::size_t i) const { return m_cell_loops.at(i); }
    /// 3D only.
    const std::vector<OrientedFace> & cell_faces(std::size_t i) const { return m_cell_faces.at(i); }

    /// Global id of the edge joining a and b; throws std::out_of_range if absent.
    std::size_t edge_id(std::size_t a, std::size_t b) const;
    /// Sorted global edge ids of a cell.
    std::vector<std::size_t> cell_edges(std::size_t cell) const;
    /// Sorted global vertex ids of a cell.
    std::vector<std::size_t> cell_vertices(std::size_t cell) const;

    /// Throws ValidationError naming the offending entity.
    void validate() const;

  private:
    void build_edge_index();

    int m_dim = 0;
    std::vector<Eigen::Vector3d> m_vertices;
    std::vector<std::array<std::size_t, 2>> m_edges;
    std::vector<std::vector<std::size_t>> m_faces;
    std::vector<std::vector<std::size_t>> m_cell_loops;
    std::vector<std::vector<OrientedFace>> m_cell_faces;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> m_edge_index;
  };

  //------------------------------------------------------------------------------
  // File format
  //------------------------------------------------------------------------------

  PolytopalMesh load_mesh(const std::string & path);
  PolytopalMesh parse_mesh(const std::string & text);
  std::string format_mesh(const PolytopalMesh & mesh);
  void save_mesh(const PolytopalMesh & mesh, const std::string & path);

  //------------------------------------------------------------------------------
  // Element geometry
  //------------------------------------------------------------------------------

  struct EdgeGeometry
  {
    std::size_t id;                      ///< global edge id
    std::array<std::size_t, 2> vertices; ///< (low, high) global vertex ids
    double length;
    Eigen::Vector3d midpoint;
    Eigen::Vector3d tangent; ///< global tangent, low -> high vertex id
  };

  /// One edge as seen from a face: counterclockwise tangent and in-plane outward normal.
  struct FaceEdge
  {
    std::size_t edge;        ///< index into ElementGeometry::edges
    std::size_t global_edge; ///< global edge id
    double length;
    Eigen::Vector3d start;
    Eigen::Vector3d end;
    Eigen::Vector3d midpoint;
    Eigen::Vector3d tangent; ///< t_e, counterclockwise w.r.t. the face normal
    Eigen::Vector3d normal;  ///< n_e = t_e x n_F, outward in the face plane
    int sign;                ///< t_e . (global tangent)
  };

  struct FaceGeometry
  {
    std::size_t id;  ///< global face id (3D) or cell id (2D)
    int orientation; ///< +1 if the stored loop normal is the outward normal, -1 otherwise
    Eigen::Vector3d normal;
    double area;
    double diameter;
    Eigen::Vector3d barycenter;
    Eigen::Vector3d e1; ///< in-plane frame, e1 x e2 = normal
    Eigen::Vector3d e2;
    std::vector<std::size_t> loop; ///< global vertex ids, counterclockwise w.r.t. normal
    std::vector<Eigen::Vector3d> points;
    std::vector<FaceEdge> edges; ///< edge i joins points[i] and points[i+1]

    Eigen::Vector2d local(const Eigen::Vector3d & x) const
    {
      const Eigen::Vector3d y = x - barycenter;
      return {y.dot(e1), y.dot(e2)};
    }
    Eigen::Vector3d ambient(const Eigen::Vector2d & xi) const { return barycenter + xi(0) * e1 + xi(1) * e2; }
  };

  /// Geometry of one cell. In 2D `faces` holds the cell polygon itself.
  struct ElementGeometry
  {
    int dimension;
    std::size_t cell;
    double diameter;
    double measure;
    Eigen::Vector3d barycenter;
    std::vector<std::size_t> vertices; ///< sorted global vertex ids
    std::vector<EdgeGeometry> edges;   ///< sorted by global id (3D) or loop order (2D)
    std::vector<FaceGeometry> faces;

    const FaceGeometry & polygon() const { return faces.front(); }
  };

  ElementGeometry geometry(const PolytopalMesh & mesh, std::size_t cell);

  /// Geometry of a planar polygon given by its counterclockwise loop (w.r.t. the normal it induces).
  FaceGeometry polygon_geometry(const std::vector<Eigen::Vector3d> & points);

  //------------------------------------------------------------------------------
  // Shape regularity
  //------------------------------------------------------------------------------

  struct CellRegularity
  {
    double gamma;              ///< star-shapedness estimate: 2 * (min facet distance to barycenter) / h_E
    double min_face_ratio;     ///< min h_F / h_E (3D), 1 in 2D
    double min_edge_ratio;     ///< min h_e / h_F
    std::size_t face_count;    ///< faces per cell (edges per cell in 2D)
    std::size_t max_face_edges; ///< edges per face
  };

  struct RegularityMetrics
  {
    std::vector<CellRegularity> cells;
    double min_gamma;
    double min_face_ratio;
    double min_edge_ratio;
    std::size_t max_face_count;
    std::size_t max_face_edges;
    double max_diameter;
    /// Cells with gamma below the threshold passed to regularity_report.
    std::vector<std::size_t> flagged;
  };

  RegularityMetrics regularity_report(const PolytopalMesh & mesh, double gamma_threshold = 0.1);

  //------------------------------------------------------------------------------
  // Mesh families
  //------------------------------------------------------------------------------

  /// Built-in family of meshes of the unit square / cube.
  ///
  /// families: "squares", "distorted-quads", "hexagons" (2D); "cubes", "distorted-hexes" (3D).
  /// `h` holds the nominal grid spacings (a value h gives round(1/h) cells per side).
  struct FamilySpec
  {
    std::string family = "squares";
    std::vector<double> h;
    double jitter = 0.2;
    std::uint64_t seed = 7;
    double gamma_min = 0.3;
  };

  std::vector<PolytopalMesh> generate_family(const FamilySpec & spec);
  PolytopalMesh generate_mesh(const FamilySpec & spec, double h);
  int family_dimension(const std::string & family);

} // namespace vemfacet

#endif
