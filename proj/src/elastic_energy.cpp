#include "dislo/elastic_energy.hpp"

#include <algorithm>
#include <deque>
#include <future>
#include <queue>
#include <random>

namespace dislo {

namespace {

Mat2 local_edge_matrix(const IntrinsicMesh& mesh, int t) {
  const auto x = mesh.local_coords(t);
  Mat2 D;
  D.col(0) = x[1] - x[0];
  D.col(1) = x[2] - x[0];
  return D;
}

// Rotation carrying local coordinates of u into those of its neighbour t.
Mat2 unfold_rotation(const IntrinsicMesh& mesh, int t, int u) {
  const auto pl = develop_strip(mesh, {t, u});
  return rotation(pl[1].angle);
}

}  // namespace

MeshFrame propagate_frame(const IntrinsicMesh& mesh, int root, double seed) {
  const int nt = mesh.num_triangles();
  if (root < 0 || root >= nt) throw Error("propagate_frame: root triangle out of range");
  MeshFrame fr;
  fr.root = root;
  fr.seed = seed;
  fr.E.assign(nt, Mat2::Zero());
  fr.tree_parent.assign(nt, -1);
  std::vector<char> seen(nt, 0);
  std::vector<char> tree_edge(mesh.num_edges(), 0);
  fr.E[root] = rotation(seed);
  seen[root] = 1;
  std::queue<int> q;
  q.push(root);
  while (!q.empty()) {
    const int t = q.front();
    q.pop();
    for (int k = 0; k < 3; ++k) {
      const int h = 3 * t + k, o = mesh.twin(h);
      const int e = mesh.halfedge_edge(h);
      if (o < 0 || mesh.is_slit_edge(e) || seen[o / 3]) continue;
      const int u = o / 3;
      fr.E[u] = unfold_rotation(mesh, t, u).transpose() * fr.E[t];
      fr.tree_parent[u] = t;
      tree_edge[e] = 1;
      seen[u] = 1;
      q.push(u);
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw Error("propagate_frame: slits disconnect the mesh");
  for (int h = 0; h < 3 * nt; ++h) {
    const int o = mesh.twin(h), e = mesh.halfedge_edge(h);
    if (o < h || tree_edge[e] || mesh.is_slit_edge(e)) continue;
    const int t = h / 3, u = o / 3;
    const double r = (fr.E[u] - unfold_rotation(mesh, t, u).transpose() * fr.E[t]).norm();
    fr.max_residual = std::max(fr.max_residual, r);
    if (r > kFrameConsistencyTolerance) throw HolonomyObstruction(e, r);
  }
  return fr;
}

MeshFrame frame_from_development(const IntrinsicMesh& mesh, const std::vector<std::array<Vec2, 3>>& dev,
                                 double seed) {
  if (static_cast<int>(dev.size()) != mesh.num_triangles()) throw Error("development size mismatch");
  MeshFrame fr;
  fr.seed = seed;
  fr.tree_parent.assign(mesh.num_triangles(), -1);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    Mat2 Dd;
    Dd.col(0) = dev[t][1] - dev[t][0];
    Dd.col(1) = dev[t][2] - dev[t][0];
    // local -> development is a rotation; the frame is its inverse applied to rotation(seed)
    const Mat2 R = Dd * local_edge_matrix(mesh, t).inverse();
    const double ang = std::atan2(R(1, 0) - R(0, 1), R(0, 0) + R(1, 1));
    fr.E.push_back(rotation(seed - ang));
  }
  return fr;
}

Mat2 triangle_differential(const IntrinsicMesh& mesh, int t, const PLMap& f) {
  const auto& T = mesh.triangle(t);
  Mat2 Y;
  Y.col(0) = f[T[1]] - f[T[0]];
  Y.col(1) = f[T[2]] - f[T[0]];
  return Y * local_edge_matrix(mesh, t).inverse();
}

PLMap develop_mesh(const IntrinsicMesh& mesh, const MeshFrame& frame) {
  const int nt = mesh.num_triangles();
  PLMap f(mesh.num_vertices(), Vec2::Zero());
  std::vector<char> placed(mesh.num_vertices(), 0);
  // x -> A x + s carries local coordinates of a triangle into the target plane
  std::vector<Mat2> A(nt);
  std::vector<Vec2> s(nt);
  std::vector<char> done(nt, 0);
  auto place = [&](int t) {
    const auto x = mesh.local_coords(t);
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.triangle(t)[k];
      if (!placed[v]) {
        f[v] = A[t] * x[k] + s[t];
        placed[v] = 1;
      }
    }
  };
  const int root = frame.root;
  A[root] = frame.E[root].inverse();
  s[root] = Vec2::Zero();
  done[root] = 1;
  place(root);
  std::queue<int> q;
  q.push(root);
  while (!q.empty()) {
    const int t = q.front();
    q.pop();
    for (int k = 0; k < 3; ++k) {
      const int o = mesh.twin(3 * t + k);
      if (o < 0 || mesh.is_slit_edge(mesh.halfedge_edge(3 * t + k)) || done[o / 3]) continue;
      const int u = o / 3;
      const auto pl = develop_strip(mesh, {t, u});
      A[u] = A[t] * rotation(pl[1].angle);
      s[u] = A[t] * pl[1].shift + s[t];
      done[u] = 1;
      place(u);
      q.push(u);
    }
  }
  const Vec2 origin = f[0];
  for (auto& p : f) p -= origin;
  return f;
}

std::vector<double> energy_densities(const PLMap& f, const IntrinsicMesh& mesh, const MeshFrame& frame,
                                     const Archetype& w) {
  std::vector<double> out(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) out[t] = w.evaluate(triangle_differential(mesh, t, f) * frame.E[t]);
  return out;
}

double energy(const PLMap& f, const IntrinsicMesh& mesh, const MeshFrame& frame, const Archetype& w) {
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    sum += mesh.area(t) * w.evaluate(triangle_differential(mesh, t, f) * frame.E[t]);
  return sum;
}

PLEnergyProblem mesh_problem(const IntrinsicMesh& mesh, const MeshFrame& frame) {
  PLEnergyProblem pr;
  pr.num_vertices = mesh.num_vertices();
  pr.triangles = mesh.triangles();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    pr.K.push_back(local_edge_matrix(mesh, t).inverse() * frame.E[t]);
    pr.weight.push_back(mesh.area(t));
  }
  return pr;
}

double PLEnergyProblem::evaluate(const PLMap& f, const Archetype& w, std::vector<Vec2>* grad) const {
  if (grad) grad->assign(f.size(), Vec2::Zero());
  double sum = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& T = triangles[t];
    Mat2 Y;
    Y.col(0) = f[T[1]] - f[T[0]];
    Y.col(1) = f[T[2]] - f[T[0]];
    const Mat2 A = Y * K[t];
    sum += weight[t] * w.evaluate(A);
    if (grad) {
      const Mat2 dY = weight[t] * w.gradient(A) * K[t].transpose();
      (*grad)[T[1]] += dY.col(0);
      (*grad)[T[2]] += dY.col(1);
      (*grad)[T[0]] -= dY.col(0) + dY.col(1);
    }
  }
  return sum;
}

std::vector<Vec2> energy_gradient(const PLMap& f, const IntrinsicMesh& mesh, const MeshFrame& frame,
                                  const Archetype& w) {
  std::vector<Vec2> g;
  mesh_problem(mesh, frame).evaluate(f, w, &g);
  return g;
}

LbfgsResult lbfgs(const ObjectiveFn& fg, Eigen::VectorXd x, const LbfgsOptions& opts) {
  using Eigen::VectorXd;
  LbfgsResult res;
  VectorXd g(x.size());
  double fx = fg(x, g);
  std::deque<VectorXd> S, Y;
  std::deque<double> rho;
  VectorXd xn(x.size()), gn(x.size());
  for (res.iterations = 0;; ++res.iterations) {
    res.grad_inf = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    if (res.grad_inf < opts.tol) {
      res.status = LbfgsStatus::Converged;
      break;
    }
    if (res.iterations >= opts.max_iter) {
      res.status = LbfgsStatus::MaxIterations;
      break;
    }
    // two-loop recursion
    VectorXd d = -g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(d);
      d -= alpha[i] * Y[i];
    }
    if (!S.empty()) d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * Y[i].dot(d);
      d += (alpha[i] - beta) * S[i];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      S.clear(), Y.clear(), rho.clear();
      d = -g;
      slope = -g.squaredNorm();
    }
    // first steepest-descent step is scaled to a unit move
    double step = S.empty() && res.iterations == 0 ? 1.0 / std::max(1.0, d.norm()) : 1.0;
    bool accepted = false;
    double fn = 0.0;
    for (int b = 0; b < opts.max_backtracks; ++b, step *= opts.shrink) {
      xn = x + step * d;
      fn = fg(xn, gn);
      if (std::isfinite(fn) && fn <= fx + opts.armijo * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!S.empty()) {
        S.clear(), Y.clear(), rho.clear();
        --res.iterations;
        continue;
      }
      res.status = LbfgsStatus::LineSearchFailed;
      break;
    }
    VectorXd s = xn - x, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opts.memory) S.pop_front(), Y.pop_front(), rho.pop_front();
    }
    x.swap(xn);
    g.swap(gn);
    fx = fn;
  }
  res.x = std::move(x);
  res.value = fx;
  return res;
}

MinimizeResult minimize_problem(const PLEnergyProblem& problem, const Archetype& w, const PLMap& start,
                                double length_scale, const MinimizeOptions& opts) {
  const int nv = problem.num_vertices;
  // unknowns: vertices 1..nv-1
  auto unpack = [nv](const Eigen::VectorXd& x) {
    PLMap f(nv, Vec2::Zero());
    for (int v = 1; v < nv; ++v) f[v] = x.segment<2>(2 * (v - 1));
    return f;
  };
  const ObjectiveFn fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    std::vector<Vec2> gv;
    const double val = problem.evaluate(unpack(x), w, &gv);
    g.resize(x.size());
    for (int v = 1; v < nv; ++v) g.segment<2>(2 * (v - 1)) = gv[v];
    return val;
  };

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> noise(0.0, opts.perturbation * length_scale);

  LbfgsOptions lo;
  lo.tol = opts.tol;
  lo.max_iter = opts.max_iter;
  // starts are drawn in run order from one stream, so running them concurrently
  // leaves the result unchanged
  std::vector<Eigen::VectorXd> starts;
  for (int run = 0; run <= opts.restarts; ++run) {
    Eigen::VectorXd x0(2 * (nv - 1));
    for (int v = 1; v < nv; ++v) {
      Vec2 p = start[v] - start[0];
      if (run > 0) p += Vec2(noise(rng), noise(rng));
      x0.segment<2>(2 * (v - 1)) = p;
    }
    starts.push_back(std::move(x0));
  }
  std::vector<std::future<LbfgsResult>> runs;
  for (auto& x0 : starts) runs.push_back(std::async(std::launch::async, [&fg, &lo, &x0] { return lbfgs(fg, x0, lo); }));

  MinimizeResult best;
  bool have = false;
  std::vector<double> converged_energies;
  for (auto& fut : runs) {
    const auto r = fut.get();
    best.run_energies.push_back(r.value);
    if (r.status == LbfgsStatus::Converged) converged_energies.push_back(r.value);
    const bool better = !have || (r.status == LbfgsStatus::Converged && !best.converged) ||
                        ((r.status == LbfgsStatus::Converged) == best.converged && r.value < best.energy);
    if (better) {
      have = true;
      best.map = unpack(r.x);
      best.energy = r.value;
      best.grad_inf = r.grad_inf;
      best.iterations = r.iterations;
      best.status = r.status;
      best.converged = r.status == LbfgsStatus::Converged;
    }
  }
  if (!converged_energies.empty()) {
    const auto [lo_it, hi_it] = std::minmax_element(converged_energies.begin(), converged_energies.end());
    best.restart_spread = (*hi_it - *lo_it) / std::max(std::abs(*lo_it), 1e-300);
  }
  std::vector<double> dens;
  for (std::size_t t = 0; t < problem.triangles.size(); ++t) {
    const auto& T = problem.triangles[t];
    Mat2 Y;
    Y.col(0) = best.map[T[1]] - best.map[T[0]];
    Y.col(1) = best.map[T[2]] - best.map[T[0]];
    dens.push_back(w.evaluate(Y * problem.K[t]));
  }
  best.density_min = *std::min_element(dens.begin(), dens.end());
  best.density_max = *std::max_element(dens.begin(), dens.end());
  best.density_histogram.assign(std::max(1, opts.histogram_bins), 0);
  const double span = best.density_max - best.density_min;
  for (double d : dens) {
    int b = span > 0 ? static_cast<int>((d - best.density_min) / span * best.density_histogram.size()) : 0;
    b = std::min(b, static_cast<int>(best.density_histogram.size()) - 1);
    ++best.density_histogram[b];
  }
  if (best.status == LbfgsStatus::MaxIterations) throw MaxIterations(best);
  if (best.status == LbfgsStatus::LineSearchFailed) throw LineSearchFailed(best);
  return best;
}

MinimizeResult minimize(const IntrinsicMesh& mesh, const MeshFrame& frame, const Archetype& w,
                        const MinimizeOptions& opts) {
  double mean_edge = 0.0;
  for (double l : mesh.lengths()) mean_edge += l / mesh.lengths().size();
  return minimize_problem(mesh_problem(mesh, frame), w, develop_mesh(mesh, frame), mean_edge, opts);
}

ChartMesh square_chart_mesh(int m, const Rect& box) {
  ChartMesh c;
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i)
      c.points.emplace_back(box.lo.x() + (box.hi.x() - box.lo.x()) * i / m,
                            box.lo.y() + (box.hi.y() - box.lo.y()) * j / m);
  auto id = [m](int i, int j) { return j * (m + 1) + i; };
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      c.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      c.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return c;
}

double smooth_energy(const FrameField& field, const ChartMesh& chart, const std::vector<Vec2>& f, const Archetype& w,
                     int level) {
  if (f.size() != chart.points.size()) throw Error("smooth_energy: map size mismatch");
  const int k = 1 << std::max(level, 0);
  double sum = 0.0;
  for (const auto& T : chart.triangles) {
    const Vec2 &a = chart.points[T[0]], &b = chart.points[T[1]], &c = chart.points[T[2]];
    Mat2 X, Y;
    X.col(0) = b - a;
    X.col(1) = c - a;
    Y.col(0) = f[T[1]] - f[T[0]];
    Y.col(1) = f[T[2]] - f[T[0]];
    const Mat2 df = Y * X.inverse();
    const double sub_area = 0.5 * std::abs(X.determinant()) / (k * k);
    // centroids of the k^2 similar subtriangles in barycentric steps of 1/k
    for (int i = 0; i < k; ++i)
      for (int j = 0; i + j < k; ++j) {
        for (int up = 0; up < 2; ++up) {
          if (up == 1 && i + j + 1 >= k) continue;
          const double u = up == 0 ? (i + 1.0 / 3.0) / k : (i + 2.0 / 3.0) / k;
          const double v = up == 0 ? (j + 1.0 / 3.0) / k : (j + 2.0 / 3.0) / k;
          const Vec2 x = a + u * X.col(0) + v * X.col(1);
          const Mat2 E = field.frame(x);
          sum += sub_area * w.evaluate(df * E) / std::abs(E.determinant());
        }
      }
  }
  return sum;
}

TestMap affine_test_map(const Mat2& F, const Vec2& shift) {
  TestMap m;
  m.value = [F, shift](const Vec2& x) { return Vec2(F * x + shift); };
  m.jacobian = [F](const Vec2&) { return F; };
  m.hessian = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
  return m;
}

double ResidualField::max_norm() const {
  double m = 0.0;
  for (const auto& r : residual) m = std::max(m, r.norm());
  return m;
}

ResidualField el_residual(const FrameField& field, const TestMap& f, const Archetype& w, int nx, int ny,
                          const Rect& box, TorsionTerm mode, double fd_step) {
  ResidualField out;
  out.nx = nx;
  out.ny = ny;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec2 x(box.lo.x() + (box.hi.x() - box.lo.x()) * (i + 0.5) / nx,
                   box.lo.y() + (box.hi.y() - box.lo.y()) * (j + 0.5) / ny);
      const Mat2 E = field.frame(x);
      const auto dE = field.frame_derivative(x);
      const Mat2 J = f.jacobian(x);
      const auto H = f.hessian(x);
      const Mat2 A = J * E;
      if (w.smooth_at && !w.smooth_at(A)) throw NonSmoothPoint(x);
      const Mat2 G = w.gradient(A);

      Vec2 second = Vec2::Zero();
      for (int a = 0; a < 2; ++a) {
        // B.col(b) = E_a E_b (f)
        Mat2 B;
        for (int b = 0; b < 2; ++b) {
          Vec2 v = Vec2::Zero();
          for (int k = 0; k < 2; ++k) v += E(k, a) * (H[k] * E.col(b) + J * dE[k].col(b));
          B.col(b) = v;
        }
        const double bn = B.norm();
        if (bn == 0.0) continue;
        const double h = 1e-5 * std::max(1.0, A.norm()) / bn;
        const Mat2 dG = (w.gradient(A + h * B) - w.gradient(A - h * B)) / (2.0 * h);
        second += dG.col(a);
      }

      Vec2 tors = Vec2::Zero();
      if (mode == TorsionTerm::Trace) {
        const Vec2 tr = torsion_trace(torsion_at(field, x));
        for (int a = 0; a < 2; ++a) tors -= tr(a) * G.col(a);
      } else {
        const Vec2 div = frame_divergence_fd(field, x, fd_step);
        for (int a = 0; a < 2; ++a) tors += div(a) * G.col(a);
      }
      out.points.push_back(x);
      out.torsion_part.push_back(tors);
      out.residual.push_back(second + tors);
    }
  return out;
}

}  // namespace dislo
