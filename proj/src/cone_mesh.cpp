#include "dislo/cone_mesh.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace dislo {

namespace {

// Kahan's area formula; stable for needle triangles.
double heron_stable(double a, double b, double c) {
  double s[3] = {a, b, c};
  std::sort(s, s + 3, std::greater<>());
  const double x = s[0], y = s[1], z = s[2];
  const double q = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z));
  return 0.25 * std::sqrt(std::max(q, 0.0));
}

std::array<Vec2, 3> point_layout(const IntrinsicMesh& mesh, int t) { return mesh.local_coords(t); }

Vec2 bary_point(const std::array<Vec2, 3>& P, const std::array<double, 3>& w) {
  return w[0] * P[0] + w[1] * P[1] + w[2] * P[2];
}

}  // namespace

double law_of_cosines_angle(double opposite, double adj1, double adj2) {
  const double area = heron_stable(opposite, adj1, adj2);
  return std::atan2(4.0 * area, adj1 * adj1 + adj2 * adj2 - opposite * opposite);
}

int IntrinsicMesh::edge_id(int a, int b) const {
  auto it = edge_index_.find(edge_key(a, b));
  return it == edge_index_.end() ? -1 : it->second;
}

std::array<Vec2, 3> IntrinsicMesh::local_coords(int t) const {
  const double l0 = halfedge_length(3 * t), l1 = halfedge_length(3 * t + 1), l2 = halfedge_length(3 * t + 2);
  const double a0 = law_of_cosines_angle(l1, l0, l2);
  return {Vec2::Zero(), Vec2(l0, 0.0), Vec2(l2 * std::cos(a0), l2 * std::sin(a0))};
}

double IntrinsicMesh::area(int t) const {
  return heron_stable(halfedge_length(3 * t), halfedge_length(3 * t + 1), halfedge_length(3 * t + 2));
}

IntrinsicMesh build_mesh(int num_vertices, const std::vector<std::array<int, 3>>& triangles,
                         const std::map<EdgeKey, double>& edge_lengths, std::vector<CoreSlit> core_slits) {
  if (num_vertices <= 0 || triangles.empty()) throw InvalidMesh("mesh needs vertices and triangles");
  IntrinsicMesh m;
  m.num_vertices_ = num_vertices;
  m.triangles_ = triangles;
  const int nt = static_cast<int>(triangles.size());

  std::map<std::pair<int, int>, int> directed;
  std::map<EdgeKey, int> incidence;
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= num_vertices)
        throw InvalidMesh("triangle " + std::to_string(t) + " references a missing vertex");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw InvalidMesh("triangle " + std::to_string(t) + " repeats a vertex");
    for (int k = 0; k < 3; ++k) ++incidence[edge_key(tri[k], tri[(k + 1) % 3])];
  }
  for (const auto& [e, count] : incidence) {
    if (count > 2)
      throw NonManifoldEdge("edge " + std::to_string(e.first) + "-" + std::to_string(e.second) + " has " +
                            std::to_string(count) + " incident triangles");
  }
  for (int t = 0; t < nt; ++t) {
    for (int k = 0; k < 3; ++k) {
      const int a = triangles[t][k], b = triangles[t][(k + 1) % 3];
      if (!directed.emplace(std::pair{a, b}, 3 * t + k).second)
        throw InconsistentOrientation("halfedge " + std::to_string(a) + "->" + std::to_string(b) +
                                      " appears twice");
    }
  }

  m.he_edge_.assign(3 * nt, -1);
  m.twin_.assign(3 * nt, -1);
  for (const auto& [e, count] : incidence) {
    auto it = edge_lengths.find(e);
    if (it == edge_lengths.end())
      throw InvalidMesh("no length for edge " + std::to_string(e.first) + "-" + std::to_string(e.second));
    if (!(it->second > 0.0) || !std::isfinite(it->second))
      throw InvalidMesh("non-positive length on edge " + std::to_string(e.first) + "-" + std::to_string(e.second));
    m.edge_index_[e] = static_cast<int>(m.edges_.size());
    m.edges_.push_back(e);
    m.lengths_.push_back(it->second);
  }
  for (const auto& [ab, h] : directed) {
    m.he_edge_[h] = m.edge_index_.at(edge_key(ab.first, ab.second));
    auto it = directed.find({ab.second, ab.first});
    if (it != directed.end()) m.twin_[h] = it->second;
  }

  for (int t = 0; t < nt; ++t) {
    const double l0 = m.halfedge_length(3 * t), l1 = m.halfedge_length(3 * t + 1), l2 = m.halfedge_length(3 * t + 2);
    if (!(l0 < l1 + l2 && l1 < l0 + l2 && l2 < l0 + l1)) throw TriangleInequalityViolation(t);
  }

  m.vertex_corners_.assign(num_vertices, {});
  for (int t = 0; t < nt; ++t)
    for (int k = 0; k < 3; ++k) m.vertex_corners_[triangles[t][k]].push_back({t, k});
  m.on_boundary_.assign(num_vertices, 0);
  for (int h = 0; h < 3 * nt; ++h)
    if (m.twin_[h] < 0) m.on_boundary_[m.tail(h)] = m.on_boundary_[m.head(h)] = 1;
  for (int v = 0; v < num_vertices; ++v) {
    if (m.vertex_corners_[v].empty()) throw InvalidMesh("vertex " + std::to_string(v) + " is isolated");
  }

  // Each vertex star must be a single fan (or a single disk when interior).
  for (int v = 0; v < num_vertices; ++v) {
    auto [t, k] = m.vertex_corners_[v].front();
    if (m.on_boundary_[v]) {
      // rewind clockwise to the fan start
      int guard = 0;
      for (;;) {
        const int h = m.twin_[3 * t + k];
        if (h < 0) break;
        t = h / 3;
        k = (h % 3 + 1) % 3;
        if (++guard > nt) throw NonManifoldEdge("vertex " + std::to_string(v) + " star is not a fan");
      }
    }
    std::size_t visited = 0;
    const int t0 = t;
    for (;;) {
      ++visited;
      const int h = m.twin_[3 * t + (k + 2) % 3];
      if (h < 0) break;
      t = h / 3;
      k = h % 3;
      if (t == t0) break;
      if (visited > m.vertex_corners_[v].size()) break;
    }
    if (visited != m.vertex_corners_[v].size())
      throw NonManifoldEdge("vertex " + std::to_string(v) + " star is not a single fan");
  }

  // Boundary loops as ordered halfedge lists.
  std::vector<char> used(3 * nt, 0);
  std::map<int, int> boundary_from;  // tail vertex -> boundary halfedge
  for (int h = 0; h < 3 * nt; ++h)
    if (m.twin_[h] < 0) boundary_from[m.tail(h)] = h;
  for (int h = 0; h < 3 * nt; ++h) {
    if (m.twin_[h] >= 0 || used[h]) continue;
    std::vector<int> loop;
    int cur = h;
    while (!used[cur]) {
      used[cur] = 1;
      loop.push_back(cur);
      cur = boundary_from.at(m.head(cur));
    }
    m.boundary_loops_.push_back(std::move(loop));
  }

  m.slit_edge_.assign(m.edges_.size(), 0);
  m.slit_vertex_.assign(num_vertices, 0);
  for (auto& s : core_slits) {
    if (s.plus < 0 || s.plus >= num_vertices || s.minus < 0 || s.minus >= num_vertices || s.plus == s.minus)
      throw InvalidMesh("core slit endpoints invalid");
    if (s.path.empty()) s.path = {s.plus, s.minus};
    if (s.path.front() != s.plus || s.path.back() != s.minus)
      throw InvalidMesh("core slit path must run from plus to minus");
    for (std::size_t i = 0; i + 1 < s.path.size(); ++i) {
      const int e = m.edge_id(s.path[i], s.path[i + 1]);
      if (e < 0) throw InvalidMesh("core slit path uses a missing edge");
      m.slit_edge_[e] = 1;
    }
    for (int v : s.path) {
      if (m.on_boundary_[v]) throw InvalidMesh("core slit touches the boundary at vertex " + std::to_string(v));
      m.slit_vertex_[v] = 1;
    }
  }
  m.slits_ = std::move(core_slits);
  return m;
}

IntrinsicMesh build_mesh_from_sides(int num_vertices, const std::vector<std::array<int, 3>>& triangles,
                                    const std::vector<std::array<double, 3>>& sides,
                                    std::vector<CoreSlit> core_slits) {
  if (sides.size() != triangles.size()) throw InvalidMesh("one side triple per triangle required");
  std::map<EdgeKey, double> lengths;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const EdgeKey e = edge_key(triangles[t][k], triangles[t][(k + 1) % 3]);
      auto [it, fresh] = lengths.emplace(e, sides[t][k]);
      if (!fresh && std::abs(it->second - sides[t][k]) > kGlueTolerance) {
        std::ostringstream os;
        os << "edge " << e.first << "-" << e.second << " has lengths " << it->second << " and " << sides[t][k];
        throw EdgeLengthMismatch(os.str());
      }
    }
  }
  return build_mesh(num_vertices, triangles, lengths, std::move(core_slits));
}

double corner_angle(const IntrinsicMesh& mesh, int triangle, int corner) {
  const double adj1 = mesh.halfedge_length(3 * triangle + corner);
  const double opp = mesh.halfedge_length(3 * triangle + (corner + 1) % 3);
  const double adj2 = mesh.halfedge_length(3 * triangle + (corner + 2) % 3);
  return law_of_cosines_angle(opp, adj1, adj2);
}

double angle_sum(const IntrinsicMesh& mesh, int vertex) {
  double s = 0.0;
  for (auto [t, k] : mesh.corners_of(vertex)) s += corner_angle(mesh, t, k);
  return s;
}

double cone_deficit(const IntrinsicMesh& mesh, int vertex) {
  if (mesh.is_boundary_vertex(vertex)) throw BoundaryVertex(vertex);
  return 2.0 * kPi - angle_sum(mesh, vertex);
}

double boundary_turning(const IntrinsicMesh& mesh, int vertex) { return kPi - angle_sum(mesh, vertex); }

std::vector<int> vertex_ring(const IntrinsicMesh& mesh, int vertex) {
  if (mesh.is_boundary_vertex(vertex)) throw BoundaryVertex(vertex);
  auto [t, k] = mesh.corners_of(vertex).front();
  std::vector<int> ring;
  const int t0 = t;
  do {
    ring.push_back(t);
    const int h = mesh.twin(3 * t + (k + 2) % 3);
    t = h / 3;
    k = h % 3;
  } while (t != t0);
  return ring;
}

std::vector<Placement> develop_strip(const IntrinsicMesh& mesh, const std::vector<int>& triangles) {
  std::vector<Placement> out;
  if (triangles.empty()) return out;
  out.emplace_back();
  auto prev_local = mesh.local_coords(triangles[0]);
  for (std::size_t i = 1; i < triangles.size(); ++i) {
    const int ta = triangles[i - 1], tb = triangles[i];
    if (ta < 0 || ta >= mesh.num_triangles() || tb < 0 || tb >= mesh.num_triangles())
      throw InvalidPath("path references a missing triangle");
    int shared = -1;
    bool blocked = false;
    for (int k = 0; k < 3; ++k) {
      const int h = mesh.twin(3 * ta + k);
      if (h < 0 || h / 3 != tb) continue;
      if (mesh.is_slit_edge(mesh.halfedge_edge(h))) {
        blocked = true;
        continue;
      }
      shared = k;
      break;
    }
    if (shared < 0) {
      if (blocked)
        throw PathThroughSingularVertex("path crosses a core slit between triangles " + std::to_string(ta) +
                                        " and " + std::to_string(tb));
      throw InvalidPath("triangles " + std::to_string(ta) + " and " + std::to_string(tb) + " share no edge");
    }
    const int h = 3 * ta + shared;
    const int ht = mesh.twin(h);
    const Placement& P = out.back();
    const Vec2 pa = P.apply(prev_local[shared]);
    const Vec2 pb = P.apply(prev_local[(shared + 1) % 3]);
    const auto local = mesh.local_coords(tb);
    // ht runs b -> a inside tb
    const Vec2 qb = local[ht % 3];
    const Vec2 qa = local[(ht % 3 + 1) % 3];
    Placement next;
    next.angle = angle_of(pb - pa) - angle_of(qb - qa);
    next.shift = pa - rotation(next.angle) * qa;
    out.push_back(next);
    prev_local = local;
  }
  return out;
}

double transport_along(const IntrinsicMesh& mesh, const DiscretePath& path) {
  if (path.triangles.empty()) throw InvalidPath("empty path");
  if (path.closed && path.triangles.front() != path.triangles.back())
    throw OpenCircuit("closed path does not return to its start triangle");
  const auto placements = develop_strip(mesh, path.triangles);
  return wrap_angle(-placements.back().angle);
}

Vec2 burgers_vector(const IntrinsicMesh& mesh, const DiscretePath& circuit, int basepoint) {
  if (!circuit.closed || circuit.triangles.size() < 2 || circuit.triangles.front() != circuit.triangles.back())
    throw OpenCircuit("Burgers circuit must be closed");
  const std::size_t m = circuit.triangles.size() - 1;
  if (!circuit.points.empty() && circuit.points.size() != circuit.triangles.size())
    throw InvalidPath("one barycentric point per path triangle required");
  if (basepoint < 0 || static_cast<std::size_t>(basepoint) >= m) throw InvalidPath("basepoint out of range");

  std::vector<int> tris;
  std::vector<std::array<double, 3>> pts;
  for (std::size_t i = 0; i <= m; ++i) {
    const std::size_t j = (basepoint + i) % m;
    tris.push_back(circuit.triangles[j]);
    pts.push_back(circuit.points.empty() ? std::array<double, 3>{1.0 / 3, 1.0 / 3, 1.0 / 3} : circuit.points[j]);
  }
  const auto placements = develop_strip(mesh, tris);
  const Vec2 start = bary_point(point_layout(mesh, tris.front()), pts.front());
  const Vec2 end = placements.back().apply(bary_point(point_layout(mesh, tris.back()), pts.back()));
  return end - start;
}

DiscretePath ring_around(const IntrinsicMesh& mesh, const std::vector<int>& vertices) {
  if (vertices.empty()) throw InvalidPath("ring needs at least one vertex");
  const std::set<int> S(vertices.begin(), vertices.end());
  for (int v : S) {
    if (v < 0 || v >= mesh.num_vertices()) throw InvalidPath("ring vertex out of range");
    if (mesh.is_boundary_vertex(v)) throw InvalidPath("ring vertex " + std::to_string(v) + " is on the boundary");
  }
  // Start in a triangle around S[0] that has a vertex outside S.
  int t = -1, k = -1;
  for (auto [ct, ck] : mesh.corners_of(vertices.front())) {
    const auto& tri = mesh.triangle(ct);
    if (!S.count(tri[0]) || !S.count(tri[1]) || !S.count(tri[2])) {
      t = ct;
      k = ck;
      break;
    }
  }
  if (t < 0) throw InvalidPath("vertex set has no exterior neighbour");
  const int t_start = t, v_start = vertices.front();
  int v = v_start;
  DiscretePath path;
  path.closed = true;
  path.triangles.push_back(t);
  const int guard = 12 * mesh.num_triangles() + 12;
  for (int step = 0; step < guard; ++step) {
    const int hin = 3 * t + (k + 2) % 3;  // b -> v
    const int b = mesh.tail(hin);
    if (S.count(b)) {
      v = b;
      k = (k + 2) % 3;
    } else {
      const int h = mesh.twin(hin);
      if (h < 0) throw InvalidPath("ring reaches the boundary");
      t = h / 3;
      k = h % 3;
      if (path.triangles.back() != t) path.triangles.push_back(t);
    }
    if (t == t_start && v == v_start) {
      if (path.triangles.back() != t) path.triangles.push_back(t);
      if (path.triangles.size() < 3) throw InvalidPath("degenerate ring");
      return path;
    }
  }
  throw InvalidPath("ring walk did not close");
}

DiscretePath ring_around_slit(const IntrinsicMesh& mesh, int slit) {
  const auto& s = mesh.core_slits().at(slit);
  return ring_around(mesh, s.path);
}

DiscretePath boundary_circuit(const IntrinsicMesh& mesh) {
  if (mesh.boundary_loops().size() != 1) throw InvalidPath("boundary circuit needs exactly one boundary loop");
  const auto& loop = mesh.boundary_loops().front();
  DiscretePath path;
  path.closed = true;
  auto push = [&](int t) {
    if (path.triangles.empty() || path.triangles.back() != t) path.triangles.push_back(t);
  };
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const int hin = loop[i], hout = loop[(i + 1) % loop.size()];
    int t = hin / 3;
    int k = (hin % 3 + 1) % 3;  // corner of the shared vertex
    push(t);
    int guard = 0;
    while (3 * t + k != hout) {
      const int h = mesh.twin(3 * t + k);
      if (h < 0) throw InvalidPath("boundary fan broken");
      t = h / 3;
      k = (h % 3 + 1) % 3;
      push(t);
      if (++guard > mesh.num_triangles()) throw InvalidPath("boundary fan walk did not terminate");
    }
  }
  if (path.triangles.front() != path.triangles.back()) path.triangles.push_back(path.triangles.front());
  return path;
}

IntrinsicMesh subdivide(const IntrinsicMesh& mesh) {
  const int nv = mesh.num_vertices();
  std::map<EdgeKey, int> mid;
  std::map<EdgeKey, double> lengths;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto [a, b] = mesh.edges()[e];
    const int m = nv + e;
    mid[mesh.edges()[e]] = m;
    lengths[edge_key(a, m)] = 0.5 * mesh.lengths()[e];
    lengths[edge_key(m, b)] = 0.5 * mesh.lengths()[e];
  }
  std::vector<std::array<int, 3>> tris;
  tris.reserve(4 * mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& T = mesh.triangle(t);
    const int m01 = mid.at(edge_key(T[0], T[1])), m12 = mid.at(edge_key(T[1], T[2])), m20 = mid.at(edge_key(T[2], T[0]));
    const double l0 = mesh.halfedge_length(3 * t), l1 = mesh.halfedge_length(3 * t + 1),
                 l2 = mesh.halfedge_length(3 * t + 2);
    tris.push_back({T[0], m01, m20});
    tris.push_back({m01, T[1], m12});
    tris.push_back({m20, m12, T[2]});
    tris.push_back({m01, m12, m20});
    lengths[edge_key(m01, m20)] = 0.5 * l1;
    lengths[edge_key(m01, m12)] = 0.5 * l2;
    lengths[edge_key(m12, m20)] = 0.5 * l0;
  }
  std::vector<CoreSlit> slits = mesh.core_slits();
  for (auto& s : slits) {
    std::vector<int> path;
    for (std::size_t i = 0; i + 1 < s.path.size(); ++i) {
      path.push_back(s.path[i]);
      path.push_back(mid.at(edge_key(s.path[i], s.path[i + 1])));
    }
    path.push_back(s.path.back());
    s.path = std::move(path);
  }
  return build_mesh(nv + mesh.num_edges(), tris, lengths, std::move(slits));
}

std::string mesh_to_json(const IntrinsicMesh& mesh, int indent) {
  nlohmann::ordered_json j;
  j["vertices"] = mesh.num_vertices();
  j["triangles"] = mesh.triangles();
  nlohmann::ordered_json lengths = nlohmann::ordered_json::object();
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto [a, b] = mesh.edges()[e];
    lengths[std::to_string(a) + "-" + std::to_string(b)] = mesh.lengths()[e];
  }
  j["edge_lengths"] = std::move(lengths);
  nlohmann::ordered_json slits = nlohmann::ordered_json::array();
  for (const auto& s : mesh.core_slits()) {
    nlohmann::ordered_json js;
    js["plus"] = s.plus;
    js["minus"] = s.minus;
    js["theta"] = s.theta;
    js["d"] = s.d;
    if (s.path.size() != 2) js["path"] = s.path;
    slits.push_back(std::move(js));
  }
  j["core_slits"] = std::move(slits);
  return j.dump(indent);
}

IntrinsicMesh mesh_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidMesh(std::string("mesh JSON: ") + ex.what());
  }
  try {
    const int nv = j.at("vertices").get<int>();
    const auto tris = j.at("triangles").get<std::vector<std::array<int, 3>>>();
    std::map<EdgeKey, double> lengths;
    for (const auto& [key, val] : j.at("edge_lengths").items()) {
      const auto dash = key.find('-');
      if (dash == std::string::npos) throw InvalidMesh("edge key '" + key + "' is not of the form i-j");
      const int a = std::stoi(key.substr(0, dash)), b = std::stoi(key.substr(dash + 1));
      lengths[edge_key(a, b)] = val.get<double>();
    }
    std::vector<CoreSlit> slits;
    if (j.contains("core_slits")) {
      for (const auto& js : j.at("core_slits")) {
        CoreSlit s;
        s.plus = js.at("plus").get<int>();
        s.minus = js.at("minus").get<int>();
        s.theta = js.value("theta", 0.0);
        s.d = js.value("d", 0.0);
        if (js.contains("path")) s.path = js.at("path").get<std::vector<int>>();
        slits.push_back(std::move(s));
      }
    }
    return build_mesh(nv, tris, lengths, std::move(slits));
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidMesh(std::string("mesh JSON: ") + ex.what());
  }
}

void write_mesh(const IntrinsicMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << mesh_to_json(mesh, 1) << "\n";
}

IntrinsicMesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return mesh_from_json(ss.str());
}

}  // namespace dislo
