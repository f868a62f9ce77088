#pragma once

#include "dislo/elastic_energy.hpp"

namespace dislo {

struct SequenceOptions {
  double delta = kPi / 9;
  std::optional<double> theta;  // forces every core angle
};

// One rung of the ladder: the dislocated body M_n with its parallel frame and the
// correspondence F_n : M_n -> chart, affine on every triangulation triangle.
struct BodyLevel {
  int n = 0;
  GeodesicTriangulation tri;
  AssembledBody body;
  MeshFrame frame;
  std::vector<Mat2> chart_linear;  // per triangulation triangle: F_T(y) = A y + s on development coordinates
  std::vector<Vec2> chart_shift;
  std::vector<Vec2> vertex_chart;  // F_n of every mesh vertex
  std::vector<Vec2> core_images;   // F_n of (plus, minus) of every core slit, consecutive
  int dislocations = 0;
  double max_edge = 0.0;  // longest triangulation edge
  double max_core_d = 0.0;
  double burgers_total = 0.0;  // sum of |triangle Burgers vector|
  double dipole_total = 0.0;   // sum of 2 d sin(theta/2) over the cores
};

BodyLevel build_level(const FrameField& field, int n, const SequenceOptions& opts = {});
std::vector<BodyLevel> build_sequence(const FrameField& field, const std::vector<int>& ns,
                                      const SequenceOptions& opts = {});

struct FrameDeviation {
  double sup_off_core = 0.0;
  double sup_all = 0.0;
  double lp = 0.0;  // (integral of |dF_n o E_n - E|^p)^(1/p) over M_n
  double exclusion_radius = 0.0;
  int samples = 0;
  int excluded = 0;
};

// Frobenius deviation at three interior quadrature points of every mesh triangle. The
// off-core sup skips points closer than exclusion_radius to a core segment.
FrameDeviation frame_deviation(const FrameField& field, const BodyLevel& level, double exclusion_radius, double p = 2.0);

// Triangulation of the same chart region with straight edges, midpoint-refined until
// every chart edge is at most max_edge.
ChartMesh reference_chart(const BodyLevel& level, double max_edge);

// Level-0 midpoint energy of a PL map on the chart mesh, minimized from f = E(x0)^{-1}(x - x0).
MinimizeResult minimize_smooth(const FrameField& field, const ChartMesh& chart, const Archetype& w,
                               const MinimizeOptions& opts = {});

struct ProbeMap {
  std::string name;
  std::function<Vec2(const Vec2&)> f;
};
std::vector<ProbeMap> default_probes();

struct StudyOptions {
  SequenceOptions sequence;
  MinimizeOptions minimize;
  // Exclusion radius around each core segment, in units of the largest core length d
  // (a band 3d wide).
  double exclusion_factor = 1.5;
};

struct LevelRecord {
  int n = 0;
  int dislocations = 0;
  int mesh_triangles = 0;
  double max_edge = 0.0;
  double dev_sup_offcore = 0.0;
  double dev_sup_all = 0.0;
  double dev_lp = 0.0;
  double exclusion_radius = 0.0;
  double energy_n = 0.0;
  double energy_ref = 0.0;
  double abs_gap = 0.0;
  bool converged_n = false;
  bool converged_ref = false;
  double restart_spread = 0.0;
  std::vector<double> probe_n;    // I_n(f o F_n)
  std::vector<double> probe_ref;  // I(f)
  double seconds = 0.0;
};

struct ConvergenceReport {
  std::string fixture;
  std::string archetype;
  double p = 2.0;
  std::vector<int> ns;
  StudyOptions options;
  double reference_max_edge = 0.0;
  std::vector<std::string> probes;
  std::vector<LevelRecord> records;
  bool partial = false;
  std::string error;
};

constexpr int kReportSchemaVersion = 1;

ConvergenceReport gamma_study(const FrameField& field, const Archetype& w, const std::vector<int>& ns,
                              const StudyOptions& opts = {});

std::string report_to_json(const ConvergenceReport& report, bool timing = false, int indent = 2);
// Columns: n,dislocations,max_edge,dev_sup_offcore,dev_lp,energy_n,energy_ref,abs_gap,seconds
std::string report_to_csv(const ConvergenceReport& report);

}  // namespace dislo
