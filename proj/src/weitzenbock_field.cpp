#include "dislo/weitzenbock_field.hpp"

#include <algorithm>
#include <memory>
#include <sstream>

namespace dislo {

Mat2 FrameField::frame(const Vec2& x) const {
  if (!domain.contains(x)) {
    std::ostringstream os;
    os << "point (" << x.x() << ", " << x.y() << ") outside the chart of " << name;
    throw OutOfDomain(os.str());
  }
  return E(x);
}

std::array<Mat2, 2> FrameField::frame_derivative(const Vec2& x) const {
  if (!domain.contains(x)) throw OutOfDomain("derivative requested outside the chart of " + name);
  return dE(x);
}

FrameField identity_field() { return scaled_field(1.0); }

FrameField scaled_field(double s) {
  FrameField f;
  f.name = s == 1.0 ? "identity" : "scaled(" + std::to_string(s) + ")";
  f.E = [s](const Vec2&) { return Mat2(s * Mat2::Identity()); };
  f.dE = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
  return f;
}

FrameField constant_rotation_field(double angle) {
  FrameField f;
  f.name = "rotation(" + std::to_string(angle) + ")";
  const Mat2 R = rotation(angle);
  f.E = [R](const Vec2&) { return R; };
  f.dE = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
  return f;
}

FrameField constant_torsion_field(double tau) {
  FrameField f;
  std::ostringstream os;
  os << "constant_torsion(" << tau << ")";
  f.name = os.str();
  f.E = [tau](const Vec2& x) { return rotation(tau * x.y()); };
  f.dE = [tau](const Vec2& x) {
    const double a = tau * x.y();
    Mat2 d;
    d << -std::sin(a), -std::cos(a), std::cos(a), -std::sin(a);
    return std::array<Mat2, 2>{Mat2::Zero(), Mat2(tau * d)};
  };
  return f;
}

FrameField bracket_demo_field() {
  FrameField f;
  f.name = "bracket_demo";
  f.E = [](const Vec2& x) {
    Mat2 E;
    E << 1.0, x.x(), 0.0, 1.0;
    return E;
  };
  f.dE = [](const Vec2&) {
    Mat2 dx;
    dx << 0.0, 1.0, 0.0, 0.0;
    return std::array<Mat2, 2>{dx, Mat2::Zero()};
  };
  return f;
}

FrameField grid_sampled_field(const Rect& domain, int nx, int ny, std::vector<Mat2> node_values) {
  if (nx < 1 || ny < 1 || node_values.size() != static_cast<std::size_t>((nx + 1) * (ny + 1)))
    throw Error("grid_sampled: need (nx+1)(ny+1) node values");
  auto values = std::make_shared<std::vector<Mat2>>(std::move(node_values));
  FrameField f;
  f.name = "grid_sampled";
  f.domain = domain;
  f.analytic = false;
  auto interp = [domain, nx, ny, values](const Vec2& x) {
    const double u = std::clamp((x.x() - domain.lo.x()) / (domain.hi.x() - domain.lo.x()) * nx, 0.0, double(nx));
    const double v = std::clamp((x.y() - domain.lo.y()) / (domain.hi.y() - domain.lo.y()) * ny, 0.0, double(ny));
    const int i = std::min(static_cast<int>(u), nx - 1), j = std::min(static_cast<int>(v), ny - 1);
    const double s = u - i, t = v - j;
    auto at = [&](int a, int b) -> const Mat2& { return (*values)[b * (nx + 1) + a]; };
    return Mat2((1 - s) * (1 - t) * at(i, j) + s * (1 - t) * at(i + 1, j) + (1 - s) * t * at(i, j + 1) +
                s * t * at(i + 1, j + 1));
  };
  f.E = interp;
  const double hx = 1e-6 * (domain.hi.x() - domain.lo.x()), hy = 1e-6 * (domain.hi.y() - domain.lo.y());
  f.dE = [interp, hx, hy](const Vec2& x) {
    return std::array<Mat2, 2>{Mat2((interp(x + Vec2(hx, 0)) - interp(x - Vec2(hx, 0))) / (2 * hx)),
                               Mat2((interp(x + Vec2(0, hy)) - interp(x - Vec2(0, hy))) / (2 * hy))};
  };
  return f;
}

FrameField grid_sampled_field(const FrameField& source, int n) {
  std::vector<Mat2> vals;
  vals.reserve((n + 1) * (n + 1));
  const Rect& D = source.domain;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      const Vec2 x(D.lo.x() + (D.hi.x() - D.lo.x()) * i / n, D.lo.y() + (D.hi.y() - D.lo.y()) * j / n);
      vals.push_back(source.E(x));
    }
  FrameField f = grid_sampled_field(D, n, n, std::move(vals));
  f.name = "grid_sampled(" + source.name + "," + std::to_string(n) + ")";
  return f;
}

namespace {

// Splits "name(a, b, ...)" at top-level commas.
std::pair<std::string, std::vector<std::string>> split_call(const std::string& spec) {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  const auto open = spec.find('(');
  if (open == std::string::npos) return {trim(spec), {}};
  if (spec.back() != ')') throw UnknownFrameField("malformed frame field '" + spec + "'");
  std::vector<std::string> args;
  int depth = 0;
  std::string cur;
  for (std::size_t i = open + 1; i + 1 < spec.size(); ++i) {
    const char ch = spec[i];
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      args.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) args.push_back(trim(cur));
  return {trim(spec.substr(0, open)), args};
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw UnknownFrameField("bad number '" + s + "'");
  return v;
}

}  // namespace

FrameField make_frame_field(const std::string& spec) {
  const auto [name, args] = split_call(spec);
  try {
    if (name == "identity" && args.empty()) return identity_field();
    if (name == "scaled" && args.size() == 1) return scaled_field(to_double(args[0]));
    if (name == "constant_torsion" && args.size() <= 1) return constant_torsion_field(args.empty() ? 0.5 : to_double(args[0]));
    if (name == "bracket_demo" && args.empty()) return bracket_demo_field();
    if (name == "grid_sampled" && args.size() == 2)
      return grid_sampled_field(make_frame_field(args[0]), static_cast<int>(to_double(args[1])));
  } catch (const std::invalid_argument&) {
    throw UnknownFrameField("bad parameters in '" + spec + "'");
  }
  throw UnknownFrameField("unknown frame field '" + spec + "'");
}

double validate_frame_field(const FrameField& field, int m, double max_condition) {
  double worst = 1.0;
  const Rect& D = field.domain;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      const Vec2 x(D.lo.x() + (D.hi.x() - D.lo.x()) * i / (m - 1), D.lo.y() + (D.hi.y() - D.lo.y()) * j / (m - 1));
      const Mat2 E = field.E(x);
      if (!(E.determinant() > 0.0)) throw Error("frame field " + field.name + " has det E <= 0");
      Eigen::JacobiSVD<Mat2> svd(E);
      const double cond = svd.singularValues()(0) / svd.singularValues()(1);
      if (!(cond <= max_condition)) throw Error("frame field " + field.name + " is ill-conditioned");
      worst = std::max(worst, cond);
    }
  return worst;
}

Mat2 metric_at(const FrameField& field, const Vec2& x) {
  const Mat2 E = field.frame(x);
  const Mat2 Ei = E.inverse();
  return Ei.transpose() * Ei;
}

TorsionTensor torsion_at(const FrameField& field, const Vec2& x) {
  const Mat2 E = field.frame(x);
  const auto dE = field.frame_derivative(x);
  // (X.grad) Y for frame columns: sum_k X^k dE[k].col(j)
  auto dir = [&](const Vec2& X, int j) { return Vec2(X.x() * dE[0].col(j) + X.y() * dE[1].col(j)); };
  const Vec2 bracket = dir(E.col(0), 1) - dir(E.col(1), 0);
  const Vec2 t12 = -E.inverse() * bracket;
  TorsionTensor T;
  T[0][0] = T[1][1] = Vec2::Zero();
  T[0][1] = t12;
  T[1][0] = -t12;
  return T;
}

Vec2 torsion_contract(const TorsionTensor& T, const Vec2& X, const Vec2& Y) {
  Vec2 out = Vec2::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out += X(i) * Y(j) * T[i][j];
  return out;
}

Vec2 torsion_trace(const TorsionTensor& T) {
  Vec2 out;
  for (int i = 0; i < 2; ++i) out(i) = T[0][i](0) + T[1][i](1);
  return out;
}

Vec2 frame_divergence_fd(const FrameField& field, const Vec2& x, double h) {
  const double detx = field.frame(x).determinant();
  Vec2 out;
  for (int i = 0; i < 2; ++i) {
    auto comp = [&](const Vec2& y, int k) {
      const Mat2 E = field.frame(y);
      return E(k, i) / E.determinant();
    };
    const double ddx = (comp(x + Vec2(h, 0), 0) - comp(x - Vec2(h, 0), 0)) / (2 * h);
    const double ddy = (comp(x + Vec2(0, h), 1) - comp(x - Vec2(0, h), 1)) / (2 * h);
    out(i) = detx * (ddx + ddy);
  }
  return out;
}

namespace {

int step_count(double t_end, bool reference) {
  const double h = std::min(1e-3, t_end / 100.0) / (reference ? 10.0 : 1.0);
  return std::max(1, static_cast<int>(std::ceil(t_end / h - 1e-9)));
}

// RK4 on x' = E(x) v over unit time, optionally with the sensitivity S = dx/dv.
struct UnitShot {
  Vec2 end;
  Mat2 S;
};

UnitShot shoot_unit(const FrameField& field, const Vec2& p, const Vec2& v, int N, bool sensitivity,
                    std::vector<Vec2>* dense) {
  const double dt = 1.0 / N;
  Vec2 x = p;
  Mat2 S = Mat2::Zero();
  auto rhs = [&](const Vec2& y, const Mat2& Sy, Vec2& dx, Mat2& dS, double t) {
    if (!field.domain.contains(y)) throw LeftDomain(t * v.norm());
    const Mat2 E = field.E(y);
    dx = E * v;
    if (sensitivity) {
      const auto dE = field.dE(y);
      Mat2 M;
      M.col(0) = dE[0] * v;
      M.col(1) = dE[1] * v;
      dS = M * Sy + E;
    }
  };
  if (dense) dense->push_back(x);
  for (int k = 0; k < N; ++k) {
    const double t = k * dt;
    Vec2 k1, k2, k3, k4;
    Mat2 s1 = Mat2::Zero(), s2 = Mat2::Zero(), s3 = Mat2::Zero(), s4 = Mat2::Zero();
    rhs(x, S, k1, s1, t);
    rhs(x + 0.5 * dt * k1, S + 0.5 * dt * s1, k2, s2, t + 0.5 * dt);
    rhs(x + 0.5 * dt * k2, S + 0.5 * dt * s2, k3, s3, t + 0.5 * dt);
    rhs(x + dt * k3, S + dt * s3, k4, s4, t + dt);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (sensitivity) S += dt / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
    if (!field.domain.contains(x)) throw LeftDomain((t + dt) * v.norm());
    if (dense) dense->push_back(x);
  }
  return {x, S};
}

}  // namespace

GeodesicPath geodesic_shoot(const FrameField& field, const Vec2& p, const Vec2& c, double t_end,
                            const ShootOptions& opts) {
  if (!field.domain.contains(p)) throw OutOfDomain("geodesic start outside the chart");
  if (!(c.norm() > 0.0)) throw Error("geodesic direction must be nonzero");
  if (!(t_end >= 0.0)) throw Error("geodesic time must be nonnegative");
  GeodesicPath out;
  out.length = c.norm() * t_end;
  if (t_end == 0.0) {
    out.points = {p};
    out.end = p;
    return out;
  }
  // time t_end along c equals unit time along v = c t_end
  const int N = step_count(out.length, opts.reference);
  std::vector<Vec2> dense;
  const auto shot = shoot_unit(field, p, c * t_end, N, false, opts.dense ? &dense : nullptr);
  out.end = shot.end;
  out.steps = N;
  out.points = opts.dense ? std::move(dense) : std::vector<Vec2>{p, shot.end};
  return out;
}

GeodesicLink geodesic_connect(const FrameField& field, const Vec2& p, const Vec2& q) {
  GeodesicLink link;
  if ((q - p).norm() == 0.0) throw Error("geodesic_connect needs distinct endpoints");
  Vec2 v = field.frame(p).inverse() * (q - p);
  const double tol = 1e-13 * std::max(1.0, q.norm());
  for (int it = 1; it <= 50; ++it) {
    const int N = step_count(v.norm(), false);
    const auto shot = shoot_unit(field, p, v, N, true, nullptr);
    const Vec2 r = shot.end - q;
    link.residual = r.norm();
    link.iterations = it;
    if (link.residual < tol) {
      link.length = v.norm();
      link.c = v / link.length;
      return link;
    }
    const Vec2 step = shot.S.partialPivLu().solve(r);
    if (!std::isfinite(step.x()) || !std::isfinite(step.y())) break;
    v -= step;
  }
  throw ShootingDiverged("geodesic shooting did not converge in 50 Newton steps");
}

Vec2 GeodesicTriangulation::direction(int u, int v) const {
  const auto& e = edges.at(edge_index.at(edge_key(u, v)));
  return e.a == u ? e.c : Vec2(-e.c);
}

double GeodesicTriangulation::length(int u, int v) const { return edges.at(edge_index.at(edge_key(u, v))).length; }

namespace {

struct GridLayout {
  std::vector<Vec2> xi;
  std::vector<std::array<int, 3>> triangles;
};

// Equilateral grid of spacing h on [0, 1]^2, odd rows shifted by h/2.
GridLayout equilateral_grid(double h) {
  GridLayout g;
  const double dy = h * std::sqrt(3.0) / 2.0;
  const int I = static_cast<int>(std::floor(1.0 / h + 1e-9));
  const int J = static_cast<int>(std::floor(1.0 / dy + 1e-9));
  auto id = [I](int i, int j) { return j * (I + 1) + i; };
  for (int j = 0; j <= J; ++j)
    for (int i = 0; i <= I; ++i) g.xi.emplace_back(i * h + (j % 2) * 0.5 * h, j * dy);
  for (int j = 0; j < J; ++j) {
    for (int i = 0; i < I; ++i) {
      if (j % 2 == 0) {
        g.triangles.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
        g.triangles.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      } else {
        g.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        g.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      }
    }
  }
  return g;
}

}  // namespace

GeodesicTriangulation triangulate(const FrameField& field, int n, double delta, Vec2 root) {
  if (n < 2) throw Error("triangulate needs n >= 2");
  if (!(delta > 0.0 && delta <= kPi / 6 + 1e-15)) throw Error("delta must lie in (0, pi/6]");
  const Mat2 E0 = field.frame(root);
  double h = 1.25 / n;
  for (int attempt = 0;; ++attempt, h *= 0.9) {
    GeodesicTriangulation tri;
    tri.n = n;
    tri.delta = delta;
    tri.spacing = h;
    tri.retries = attempt;
    const GridLayout g = equilateral_grid(h);
    for (const auto& xi : g.xi) tri.vertices.push_back(root + E0 * xi);
    tri.triangles = g.triangles;
    for (const auto& t : tri.triangles)
      for (int k = 0; k < 3; ++k) {
        const EdgeKey e = edge_key(t[k], t[(k + 1) % 3]);
        if (tri.edge_index.count(e)) continue;
        GeodesicEdge ge;
        ge.a = e.first;
        ge.b = e.second;
        const auto link = geodesic_connect(field, tri.vertices[ge.a], tri.vertices[ge.b]);
        ge.c = link.c;
        ge.length = link.length;
        tri.edge_index[e] = static_cast<int>(tri.edges.size());
        tri.edges.push_back(ge);
      }

    int bad = -1;
    std::string which;
    for (int t = 0; t < static_cast<int>(tri.triangles.size()) && bad < 0; ++t) {
      const auto& T = tri.triangles[t];
      TriangleRecord r;
      r.c = tri.length(T[0], T[1]);
      r.a = tri.length(T[1], T[2]);
      r.b = tri.length(T[2], T[0]);
      r.alpha = ccw_angle(tri.direction(T[0], T[1]), tri.direction(T[0], T[2]));
      r.beta = ccw_angle(tri.direction(T[1], T[2]), tri.direction(T[1], T[0]));
      r.gamma = ccw_angle(tri.direction(T[2], T[0]), tri.direction(T[2], T[1]));
      r.ab_direction = angle_of(tri.direction(T[0], T[1]));
      tri.records.push_back(r);
      tri.records.back().burgers = triangle_burgers(tri, t);
      for (double l : {r.a, r.b, r.c}) {
        if (l < 1.0 / n) which = "minimum edge length";
        if (l > 1.5 / n) which = "maximum edge length";
      }
      for (double a : {r.alpha, r.beta, r.gamma})
        if (a < delta || a > kPi - delta) which = "angle";
      if (!which.empty()) bad = t;
      const double a0 = law_of_cosines_angle(r.a, r.b, r.c), b0 = law_of_cosines_angle(r.b, r.c, r.a),
                   c0 = law_of_cosines_angle(r.c, r.a, r.b);
      tri.angle_deviation.push_back(
          std::max({std::abs(r.alpha - a0), std::abs(r.beta - b0), std::abs(r.gamma - c0)}));
    }
    if (bad < 0) return tri;
    if (attempt == 3) throw QualityBoundViolated(bad, which);
  }
}

Vec2 triangle_burgers(const GeodesicTriangulation& tri, int t, bool reversed) {
  const auto& T = tri.triangles.at(t);
  Vec2 b = Vec2::Zero();
  for (int k = 0; k < 3; ++k) {
    int u = T[k], v = T[(k + 1) % 3];
    if (reversed) std::swap(u, v);
    b += tri.length(u, v) * tri.direction(u, v);
  }
  return b;
}

Vec2 torsion_from_loops(const FrameField& field, const Vec2& p, const Vec2& X, const Vec2& Y, double eps) {
  const double s = std::sqrt(eps);
  const std::array<Vec2, 4> offsets = {0.5 * s * (-X - Y), 0.5 * s * (X - Y), 0.5 * s * (X + Y), 0.5 * s * (-X + Y)};
  std::array<Vec2, 4> corner;
  for (int k = 0; k < 4; ++k) corner[k] = geodesic_shoot(field, p, offsets[k], 1.0).end;
  Vec2 b = Vec2::Zero();
  for (int k = 0; k < 4; ++k) {
    const auto link = geodesic_connect(field, corner[k], corner[(k + 1) % 4]);
    b += link.length * link.c;
  }
  return b / eps;
}

TriangulationData to_triangulation_data(const GeodesicTriangulation& tri) {
  TriangulationData d;
  d.num_vertices = static_cast<int>(tri.vertices.size());
  d.triangles = tri.triangles;
  d.records = tri.records;
  return d;
}

}  // namespace dislo
