#pragma once

#include "dislo/types.hpp"

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dislo {

struct TriangleInequalityViolation : Error {
  int triangle;
  explicit TriangleInequalityViolation(int t)
      : Error("triangle inequality violated in triangle " + std::to_string(t)), triangle(t) {}
};
struct NonManifoldEdge : Error {
  using Error::Error;
};
struct InconsistentOrientation : Error {
  using Error::Error;
};
struct InvalidMesh : Error {
  using Error::Error;
};
struct EdgeLengthMismatch : Error {
  using Error::Error;
};
struct BoundaryVertex : Error {
  int vertex;
  explicit BoundaryVertex(int v)
      : Error("cone deficit undefined at boundary vertex " + std::to_string(v)), vertex(v) {}
};
struct PathThroughSingularVertex : Error {
  using Error::Error;
};
struct InvalidPath : Error {
  using Error::Error;
};
struct OpenCircuit : Error {
  using Error::Error;
};

// Glued edges must agree to this tolerance when lengths come from two sides.
constexpr double kGlueTolerance = 1e-9;

// Curvature dipole: +theta at plus, -theta at minus, joined by the core path.
struct CoreSlit {
  int plus = -1;
  int minus = -1;
  double theta = 0.0;
  double d = 0.0;
  std::vector<int> path;  // vertex chain plus -> minus; empty means the single edge
};

using EdgeKey = std::pair<int, int>;  // (min, max)

inline EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

// Edge-length-only surface. Halfedge h = 3 t + k runs from corner k to corner k+1 of t.
// Slit edges are glued for angle sums but act as walls for transport.
class IntrinsicMesh {
 public:
  int num_vertices() const { return num_vertices_; }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
  const std::vector<EdgeKey>& edges() const { return edges_; }
  const std::vector<double>& lengths() const { return lengths_; }
  const std::vector<CoreSlit>& core_slits() const { return slits_; }
  const std::vector<std::vector<int>>& boundary_loops() const { return boundary_loops_; }

  int edge_id(int a, int b) const;  // -1 when absent
  int halfedge_edge(int h) const { return he_edge_[h]; }
  int twin(int h) const { return twin_[h]; }
  int tail(int h) const { return triangles_[h / 3][h % 3]; }
  int head(int h) const { return triangles_[h / 3][(h % 3 + 1) % 3]; }
  double halfedge_length(int h) const { return lengths_[he_edge_[h]]; }

  bool is_boundary_vertex(int v) const { return on_boundary_[v] != 0; }
  bool is_slit_edge(int e) const { return slit_edge_[e] != 0; }
  bool is_slit_vertex(int v) const { return slit_vertex_[v] != 0; }

  // Corner positions of t in its canonical layout: corner 0 at the origin,
  // corner 1 on the positive x-axis, corner 2 in the upper half-plane.
  std::array<Vec2, 3> local_coords(int t) const;
  double area(int t) const;

  // (triangle, corner) pairs at a vertex, in triangle order.
  const std::vector<std::pair<int, int>>& corners_of(int v) const { return vertex_corners_[v]; }

 private:
  friend IntrinsicMesh build_mesh(int, const std::vector<std::array<int, 3>>&,
                                  const std::map<EdgeKey, double>&, std::vector<CoreSlit>);
  int num_vertices_ = 0;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<EdgeKey> edges_;
  std::vector<double> lengths_;
  std::map<EdgeKey, int> edge_index_;
  std::vector<int> he_edge_;
  std::vector<int> twin_;
  std::vector<char> on_boundary_;
  std::vector<char> slit_edge_;
  std::vector<char> slit_vertex_;
  std::vector<std::vector<std::pair<int, int>>> vertex_corners_;
  std::vector<std::vector<int>> boundary_loops_;
  std::vector<CoreSlit> slits_;
};

IntrinsicMesh build_mesh(int num_vertices, const std::vector<std::array<int, 3>>& triangles,
                         const std::map<EdgeKey, double>& edge_lengths,
                         std::vector<CoreSlit> core_slits = {});

// Builds from per-triangle side lengths (side k joins corners k and k+1); shared
// edges must agree within kGlueTolerance or EdgeLengthMismatch is thrown.
IntrinsicMesh build_mesh_from_sides(int num_vertices, const std::vector<std::array<int, 3>>& triangles,
                                    const std::vector<std::array<double, 3>>& sides,
                                    std::vector<CoreSlit> core_slits = {});

// Interior angle of three lengths: the angle opposite `opposite`.
double law_of_cosines_angle(double opposite, double adj1, double adj2);

double corner_angle(const IntrinsicMesh& mesh, int triangle, int corner);
double angle_sum(const IntrinsicMesh& mesh, int vertex);
double cone_deficit(const IntrinsicMesh& mesh, int vertex);
// pi minus the angle sum; meaningful at boundary vertices.
double boundary_turning(const IntrinsicMesh& mesh, int vertex);

// Triangles ordered counter-clockwise around an interior vertex.
std::vector<int> vertex_ring(const IntrinsicMesh& mesh, int vertex);

// A strip of triangles. Closed paths repeat the start triangle at the end.
// Each triangle may carry a barycentric point; the default is the centroid.
struct DiscretePath {
  std::vector<int> triangles;
  std::vector<std::array<double, 3>> points;
  bool closed = false;
};

// Planar isometry x -> R(angle) x + shift.
struct Placement {
  double angle = 0.0;
  Vec2 shift = Vec2::Zero();
  Vec2 apply(const Vec2& x) const { return rotation(angle) * x + shift; }
};

// Develops every triangle of the strip into the layout frame of the first one.
std::vector<Placement> develop_strip(const IntrinsicMesh& mesh, const std::vector<int>& triangles);

// Rotation (radians, in (-pi, pi]) a vector undergoes when transported along the
// path, expressed in the frame of the start triangle. Closed paths give holonomy.
double transport_along(const IntrinsicMesh& mesh, const DiscretePath& path);

// Sum of developed segment vectors, in the layout frame of the triangle at `basepoint`.
Vec2 burgers_vector(const IntrinsicMesh& mesh, const DiscretePath& circuit, int basepoint = 0);

// Closed circuit around a connected set of interior vertices, never crossing an edge
// joining two of them (so it also never crosses the slit when the set holds a core).
DiscretePath ring_around(const IntrinsicMesh& mesh, const std::vector<int>& vertices);
DiscretePath ring_around_slit(const IntrinsicMesh& mesh, int slit);
// Closed circuit hugging the (single) boundary loop counter-clockwise.
DiscretePath boundary_circuit(const IntrinsicMesh& mesh);

// Intrinsic 1-to-4 midpoint refinement. Slit paths are refined alongside.
IntrinsicMesh subdivide(const IntrinsicMesh& mesh);

std::string mesh_to_json(const IntrinsicMesh& mesh, int indent = -1);
IntrinsicMesh mesh_from_json(const std::string& text);
void write_mesh(const IntrinsicMesh& mesh, const std::string& path);
IntrinsicMesh read_mesh(const std::string& path);

}  // namespace dislo
