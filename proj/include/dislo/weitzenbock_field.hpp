#pragma once

#include "dislo/dislocation_builder.hpp"

#include <functional>

namespace dislo {

struct OutOfDomain : Error {
  using Error::Error;
};
struct LeftDomain : Error {
  double t_exit;
  explicit LeftDomain(double t) : Error("geodesic left the chart at t = " + std::to_string(t)), t_exit(t) {}
};
struct ShootingDiverged : Error {
  using Error::Error;
};
struct QualityBoundViolated : Error {
  int triangle;
  std::string bound;
  QualityBoundViolated(int t, std::string which)
      : Error("triangle " + std::to_string(t) + " violates the " + which + " bound"), triangle(t), bound(std::move(which)) {}
};
struct UnknownFrameField : Error {
  using Error::Error;
};

struct Rect {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Ones();
  bool contains(const Vec2& x) const {
    return x.x() >= lo.x() && x.x() <= hi.x() && x.y() >= lo.y() && x.y() <= hi.y();
  }
};

// Default chart of the fixtures: the unit square with a margin for geodesic bulge.
inline Rect fixture_domain() { return Rect{Vec2(-0.125, -0.125), Vec2(1.125, 1.125)}; }

// Global frame on a planar chart; columns of E(x) are E1, E2 in chart coordinates.
struct FrameField {
  std::string name;
  Rect domain = fixture_domain();
  std::function<Mat2(const Vec2&)> E;
  // Partial derivatives dE/dx, dE/dy.
  std::function<std::array<Mat2, 2>(const Vec2&)> dE;
  bool analytic = true;

  Mat2 frame(const Vec2& x) const;
  std::array<Mat2, 2> frame_derivative(const Vec2& x) const;
};

FrameField identity_field();
FrameField scaled_field(double s);
FrameField constant_rotation_field(double angle);
// E = R(tau y): Euclidean metric, constant torsion magnitude tau.
FrameField constant_torsion_field(double tau = 0.5);
// E1 = d/dx, E2 = x d/dx + d/dy.
FrameField bracket_demo_field();
// Bilinear interpolation of samples of `source` on an (n+1) x (n+1) node grid;
// derivatives by central differences of the interpolant.
FrameField grid_sampled_field(const FrameField& source, int n);
FrameField grid_sampled_field(const Rect& domain, int nx, int ny, std::vector<Mat2> node_values);

// "identity", "scaled(s)", "constant_torsion(tau)", "bracket_demo",
// "grid_sampled(<inner spec>, n)".
FrameField make_frame_field(const std::string& spec);

// Checks det E > 0 and bounded conditioning on a sample grid; returns the worst condition number.
double validate_frame_field(const FrameField& field, int samples_per_axis = 17, double max_condition = 1e6);

Mat2 metric_at(const FrameField& field, const Vec2& x);

// T[i][j] holds the frame components (T^1_ij, T^2_ij) of T(E_i, E_j) = -[E_i, E_j].
using TorsionTensor = std::array<std::array<Vec2, 2>, 2>;
TorsionTensor torsion_at(const FrameField& field, const Vec2& x);
// T(X, Y) for X, Y given in frame components.
Vec2 torsion_contract(const TorsionTensor& T, const Vec2& X, const Vec2& Y);
// Component i is the trace T^j_ji, which equals -div E_i.
Vec2 torsion_trace(const TorsionTensor& T);
// div E_i with respect to the volume form of the intrinsic metric, by central differences
// of det(E) * d/dx^k (E_i^k / det E) with step h.
Vec2 frame_divergence_fd(const FrameField& field, const Vec2& x, double h);

struct ShootOptions {
  bool reference = false;  // 10x finer step
  bool dense = false;      // keep every step
};

struct GeodesicPath {
  std::vector<Vec2> points;  // dense output when requested, else start and end
  Vec2 end = Vec2::Zero();
  double length = 0.0;  // intrinsic length |c| t_end
  int steps = 0;
};

// Integral curve of x' = E(x) c for t in [0, t_end] by classical RK4 with
// step min(1e-3, t_end/100).
GeodesicPath geodesic_shoot(const FrameField& field, const Vec2& p, const Vec2& c, double t_end,
                            const ShootOptions& opts = {});

struct GeodesicLink {
  Vec2 c = Vec2::Zero();  // unit frame direction
  double length = 0.0;
  double residual = 0.0;  // endpoint error of the converged shot
  int iterations = 0;
};

GeodesicLink geodesic_connect(const FrameField& field, const Vec2& p, const Vec2& q);

struct GeodesicEdge {
  int a = -1, b = -1;  // a < b
  Vec2 c = Vec2::Zero();  // direction leaving a
  double length = 0.0;
};

struct GeodesicTriangulation {
  int n = 0;
  double delta = 0.0;
  double spacing = 0.0;  // grid spacing actually used
  int retries = 0;
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<GeodesicEdge> edges;
  std::map<EdgeKey, int> edge_index;
  std::vector<TriangleRecord> records;
  std::vector<double> angle_deviation;  // max |alpha - alpha0| per triangle

  // Frame direction of the geodesic leaving u toward v.
  Vec2 direction(int u, int v) const;
  double length(int u, int v) const;
};

GeodesicTriangulation triangulate(const FrameField& field, int n, double delta = kPi / 9, Vec2 root = Vec2::Zero());

// Sum of length times frame direction around the boundary, A -> B -> C -> A.
Vec2 triangle_burgers(const GeodesicTriangulation& tri, int t, bool reversed = false);

// Burgers vector of the image of a sqrt(eps)-parallelogram centred at p, divided by eps.
Vec2 torsion_from_loops(const FrameField& field, const Vec2& p, const Vec2& X, const Vec2& Y, double eps);

TriangulationData to_triangulation_data(const GeodesicTriangulation& tri);

}  // namespace dislo
