#pragma once

#include "dislo/cone_mesh.hpp"

#include <optional>

namespace dislo {

struct AnglesDontSumToPi : Error {
  using Error::Error;
};
struct InconsistentClosureGap : Error {
  using Error::Error;
};
struct CoreTouchesBoundary : Error {
  using Error::Error;
};
struct WedgeDoesNotFit : Error {
  using Error::Error;
};
struct DegenerateTriangle : Error {
  using Error::Error;
};
struct VertexAngleDefect : Error {
  int vertex;
  double residual;
  VertexAngleDefect(int v, double r)
      : Error("angle sum at vertex " + std::to_string(v) + " misses 2pi by " + std::to_string(r)),
        vertex(v),
        residual(r) {}
};

double burgers_magnitude(double d, double theta);

struct CoreParameters {
  double theta = 0.0;
  double d = 0.0;
};

// theta = |b|^(1/3) clamped to (0, pi/4], d = |b| / (2 sin(theta/2)).
// A fixed theta may be forced instead.
CoreParameters choose_core(double burgers_norm, std::optional<double> theta = std::nullopt);

// Square [-H, H]^2 with a wedge of angle theta removed at p = 0 and the slot
// between r = d(cos, sin)(theta/2) and r' = d(cos, -sin)(theta/2) welded out to the
// right edge. Singular points: +theta at p, -theta at r.
IntrinsicMesh single_dislocation_plane(double halfwidth, double theta, double d, int refinements = 0);

// Boundary data of a geodesic triangle ABC. Sides a = |BC|, b = |CA|, c = |AB|;
// alpha, beta, gamma are the interior angles at A, B, C.
struct TriangleRecord {
  double a = 0, b = 0, c = 0;
  double alpha = 0, beta = 0, gamma = 0;
  Vec2 burgers = Vec2::Zero();
  // Heading of side AB in the frame in which `burgers` is expressed. Without it
  // only |burgers| is checked and the development is rotated onto `burgers`.
  std::optional<double> ab_direction;
};

struct DislocatedTriangleOptions {
  std::optional<double> theta;  // overrides choose_core
  double min_angle = 0.0;       // uniform non-degeneracy bound delta
};

struct DislocatedTriangle {
  TriangleRecord record;
  Vec2 gap = Vec2::Zero();  // closure gap of the development, frame coordinates
  bool has_core = false;
  CoreParameters core;
  IntrinsicMesh mesh;
  std::array<int, 3> corner_ids{};      // mesh vertices of A, B, C
  std::array<Vec2, 3> corner_dev{};     // development positions of A, B, C
  std::vector<std::array<Vec2, 3>> dev;  // development coordinates per mesh triangle
  int exit_side = -1;                   // side split by the weld seam (0 = AB, 1 = BC, 2 = CA)
  double exit_arclength = 0.0;          // from the side's first corner
  bool shifted_placement = false;       // true when the alternate core placement was used
};

DislocatedTriangle dislocated_triangle(const TriangleRecord& rec, const DislocatedTriangleOptions& opts = {});

// Closure gap of the planar development of the boundary, with side AB heading phi.
Vec2 development_gap(const TriangleRecord& rec, double phi);

struct TriangulationData {
  int num_vertices = 0;
  std::vector<std::array<int, 3>> triangles;  // corners A, B, C of each record
  std::vector<TriangleRecord> records;
};

std::string triangulation_to_json(const TriangulationData& data, int indent = -1);
TriangulationData triangulation_from_json(const std::string& text);

struct AssembledBody {
  IntrinsicMesh mesh;  // triangulation vertex v keeps id v
  std::vector<int> parent;                       // per mesh triangle: triangulation triangle
  std::vector<std::array<Vec2, 3>> dev;          // per mesh triangle: coordinates in the parent development
  std::vector<std::array<Vec2, 3>> corner_dev;   // per triangulation triangle
  std::vector<CoreParameters> cores;             // per triangulation triangle (theta = 0: flat)
  std::vector<int> slit_of_triangle;             // index into mesh.core_slits() or -1
  int singular_points = 0;
};

constexpr double kVertexAngleTolerance = 1e-8;

AssembledBody assemble(const TriangulationData& data, const DislocatedTriangleOptions& opts = {});

}  // namespace dislo
