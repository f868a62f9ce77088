#pragma once

#include "dislo/constitutive.hpp"
#include "dislo/weitzenbock_field.hpp"

#include <Eigen/Core>

namespace dislo {

struct HolonomyObstruction : Error {
  int edge;
  double residual;
  HolonomyObstruction(int e, double r)
      : Error("frame transport is path dependent across edge " + std::to_string(e) + " (residual " +
              std::to_string(r) + ")"),
        edge(e),
        residual(r) {}
};

struct NonSmoothPoint : Error {
  Vec2 x;
  explicit NonSmoothPoint(const Vec2& p)
      : Error("density is not twice differentiable at (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) + ")"),
        x(p) {}
};

constexpr double kFrameConsistencyTolerance = 1e-10;

// Parallel orthonormal frame per triangle, expressed in the triangle's local_coords.
struct MeshFrame {
  std::vector<Mat2> E;
  int root = 0;
  double seed = 0.0;
  std::vector<int> tree_parent;  // -1 at the root
  double max_residual = 0.0;     // worst mismatch over non-tree interior edges
};

// Breadth-first transport from `root` (frame rotation(seed) there) over interior
// non-slit edges. Throws HolonomyObstruction when a non-tree edge disagrees.
MeshFrame propagate_frame(const IntrinsicMesh& mesh, int root = 0, double seed = 0.0);

// Frame that is rotation(seed) in the given per-triangle development coordinates.
MeshFrame frame_from_development(const IntrinsicMesh& mesh, const std::vector<std::array<Vec2, 3>>& dev,
                                 double seed = 0.0);

// Image of every mesh vertex; the two sides of a slit share their vertices.
using PLMap = std::vector<Vec2>;

// df_T in local coordinates of t.
Mat2 triangle_differential(const IntrinsicMesh& mesh, int t, const PLMap& f);

// Development along the frame spanning tree, oriented so that df o E = I on the
// root triangle. Vertex 0 is moved to the origin.
PLMap develop_mesh(const IntrinsicMesh& mesh, const MeshFrame& frame);

std::vector<double> energy_densities(const PLMap& f, const IntrinsicMesh& mesh, const MeshFrame& frame,
                                     const Archetype& w);
double energy(const PLMap& f, const IntrinsicMesh& mesh, const MeshFrame& frame, const Archetype& w);
std::vector<Vec2> energy_gradient(const PLMap& f, const IntrinsicMesh& mesh, const MeshFrame& frame,
                                  const Archetype& w);

struct LbfgsOptions {
  double tol = 1e-8;  // on the gradient infinity norm
  int max_iter = 10000;
  int memory = 10;
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 60;
};

enum class LbfgsStatus { Converged, MaxIterations, LineSearchFailed };

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_inf = 0.0;
  int iterations = 0;
  LbfgsStatus status = LbfgsStatus::Converged;
};

// fg returns the value and writes the gradient.
using ObjectiveFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
LbfgsResult lbfgs(const ObjectiveFn& fg, Eigen::VectorXd x0, const LbfgsOptions& opts = {});

struct MinimizeOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  int restarts = 5;
  std::uint64_t seed = 1;
  // Restart perturbation, relative to the problem length scale.
  double perturbation = 0.1;
  int histogram_bins = 10;
};

struct MinimizeResult {
  PLMap map;
  double energy = 0.0;
  double grad_inf = 0.0;
  int iterations = 0;  // of the best run
  bool converged = false;
  LbfgsStatus status = LbfgsStatus::Converged;
  std::vector<double> run_energies;  // run 0 starts from the development
  double restart_spread = 0.0;       // (max - min) / min over converged runs
  double density_min = 0.0, density_max = 0.0;
  std::vector<int> density_histogram;
};

struct LineSearchFailed : Error {
  MinimizeResult best;
  explicit LineSearchFailed(MinimizeResult r) : Error("line search failed to decrease the energy"), best(std::move(r)) {}
};
struct MaxIterations : Error {
  MinimizeResult best;
  explicit MaxIterations(MinimizeResult r) : Error("iteration limit reached before stationarity"), best(std::move(r)) {}
};

// Sum over triangles of weight * W(Y_T K_T), Y_T = [f1 - f0, f2 - f0] on triangle T.
struct PLEnergyProblem {
  int num_vertices = 0;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Mat2> K;
  std::vector<double> weight;

  double evaluate(const PLMap& f, const Archetype& w, std::vector<Vec2>* grad = nullptr) const;
};

// K_T = D_T^{-1} E_T with D_T the local edge matrix; weight = area.
PLEnergyProblem mesh_problem(const IntrinsicMesh& mesh, const MeshFrame& frame);

// Vertex 0 is pinned at the origin; the other vertices are free. Restart noise is
// perturbation * length_scale. Throws when the best run is not stationary.
MinimizeResult minimize_problem(const PLEnergyProblem& problem, const Archetype& w, const PLMap& start,
                                double length_scale, const MinimizeOptions& opts = {});

// minimize_problem from the spanning-tree development.
MinimizeResult minimize(const IntrinsicMesh& mesh, const MeshFrame& frame, const Archetype& w,
                        const MinimizeOptions& opts = {});

// Triangulated region of the chart.
struct ChartMesh {
  std::vector<Vec2> points;
  std::vector<std::array<int, 3>> triangles;
};

// m x m squares, two triangles each.
ChartMesh square_chart_mesh(int m, const Rect& box = Rect{});

// Midpoint rule on each triangle split 4^level times; f is PL on the chart mesh.
double smooth_energy(const FrameField& field, const ChartMesh& chart, const std::vector<Vec2>& f, const Archetype& w,
                     int level = 0);

// Twice differentiable map of the chart; hessian[k] = d/dx^k of the jacobian.
struct TestMap {
  std::function<Vec2(const Vec2&)> value;
  std::function<Mat2(const Vec2&)> jacobian;
  std::function<std::array<Mat2, 2>(const Vec2&)> hessian;
};

TestMap affine_test_map(const Mat2& F, const Vec2& shift = Vec2::Zero());

enum class TorsionTerm { Trace, Divergence };

struct ResidualField {
  int nx = 0, ny = 0;
  std::vector<Vec2> points;
  std::vector<Vec2> residual;      // sum_ij D2W(A)[E_i E_j f]_ij - T^j_ji dW/dA_i
  std::vector<Vec2> torsion_part;  // the second sum alone
  double max_norm() const;
};

// Strong Euler-Lagrange residual at the cell centres of an nx x ny grid on `box`.
// The Hessian of the density comes from central differences of its gradient.
ResidualField el_residual(const FrameField& field, const TestMap& f, const Archetype& w, int nx = 32, int ny = 32,
                          const Rect& box = Rect{}, TorsionTerm mode = TorsionTerm::Trace, double fd_step = 1e-4);

}  // namespace dislo
