#include "nsub/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "nsub/errors.hpp"

namespace nsub {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mesh file '" + path.string() + "'");
  return in;
}

int parse_obj_index(const std::string& token, int vertex_count) {
  // "i", "i/t", "i//n", "i/t/n"; negative indices are relative.
  const int raw = std::stoi(token.substr(0, token.find('/')));
  const int index = raw < 0 ? vertex_count + raw : raw - 1;
  if (index < 0 || index >= vertex_count) throw ConfigError("obj: face index out of range");
  return index;
}

}  // namespace

TriMesh load_obj(const std::filesystem::path& path, bool planar) {
  std::ifstream in = open_input(path);
  std::vector<Eigen::Vector3d> points;
  std::vector<std::array<int, 3>> triangles;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d p = Eigen::Vector3d::Zero();
      ls >> p.x() >> p.y();
      if (!(ls >> p.z())) p.z() = 0.0;
      points.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (ls >> token) poly.push_back(parse_obj_index(token, static_cast<int>(points.size())));
      if (poly.size() < 3) throw ConfigError("obj: face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        triangles.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  TriMesh mesh;
  const int dim = planar ? 2 : 3;
  mesh.vertices.resize(static_cast<Eigen::Index>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    mesh.vertices.row(static_cast<Eigen::Index>(i)) = points[i].head(dim).transpose();
  }
  mesh.triangles = std::move(triangles);
  if (mesh.triangles.empty()) throw ConfigError("obj: '" + path.string() + "' has no faces");
  return mesh;
}

void save_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.precision(17);
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    out << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' '
        << (mesh.dim() > 2 ? mesh.vertices(i, 2) : 0.0) << '\n';
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
}

TetMesh load_tet(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string tag;
  long nv = -1;
  long nt = -1;
  if (!(in >> tag >> nv >> nt) || tag != "tet" || nv < 0 || nt < 0) {
    throw ConfigError("tet: '" + path.string() + "' must start with 'tet <nv> <nt>'");
  }
  TetMesh mesh;
  mesh.vertices.resize(nv, 3);
  for (long i = 0; i < nv; ++i) {
    if (!(in >> tag) || tag != "v" ||
        !(in >> mesh.vertices(i, 0) >> mesh.vertices(i, 1) >> mesh.vertices(i, 2))) {
      throw ConfigError("tet: bad vertex line " + std::to_string(i));
    }
  }
  mesh.tets.resize(static_cast<std::size_t>(nt));
  for (long e = 0; e < nt; ++e) {
    auto& t = mesh.tets[static_cast<std::size_t>(e)];
    if (!(in >> tag) || tag != "t" || !(in >> t[0] >> t[1] >> t[2] >> t[3])) {
      throw ConfigError("tet: bad element line " + std::to_string(e));
    }
    for (int idx : t) {
      if (idx < 0 || idx >= nv) throw ConfigError("tet: element index out of range");
    }
  }
  return mesh;
}

void save_tet(const std::filesystem::path& path, const TetMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "tet " << mesh.vertex_count() << ' ' << mesh.tets.size() << '\n';
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    out << "v " << mesh.vertices(i, 0) << ' ' << mesh.vertices(i, 1) << ' ' << mesh.vertices(i, 2)
        << '\n';
  }
  for (const auto& t : mesh.tets) {
    out << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  }
}

TriMesh make_grid_2d(int nx, int ny, double width, double height) {
  if (nx < 2 || ny < 2) throw ConfigError("grid2d: need at least 2 vertices per side");
  TriMesh mesh;
  mesh.vertices.resize(nx * ny, 2);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      mesh.vertices.row(j * nx + i) << width * i / (nx - 1), height * j / (ny - 1);
    }
  }
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const int a = j * nx + i;
      const int b = a + 1;
      const int c = a + nx;
      const int d = c + 1;
      if ((i + j) % 2 == 0) {
        mesh.triangles.push_back({a, b, d});
        mesh.triangles.push_back({a, d, c});
      } else {
        mesh.triangles.push_back({a, b, c});
        mesh.triangles.push_back({b, d, c});
      }
    }
  }
  return mesh;
}

TriMesh make_sheet(int nx, int nz, double width, double depth) {
  TriMesh flat = make_grid_2d(nx, nz, width, depth);
  TriMesh mesh;
  mesh.vertices.resize(flat.vertex_count(), 3);
  for (int i = 0; i < flat.vertex_count(); ++i) {
    mesh.vertices.row(i) << flat.vertices(i, 0), 0.0, flat.vertices(i, 1);
  }
  // Flip winding so normals point along +y.
  for (const auto& t : flat.triangles) mesh.triangles.push_back({t[0], t[2], t[1]});
  return mesh;
}

TetMesh make_tet_box(int nx, int ny, int nz, double sx, double sy, double sz) {
  if (nx < 2 || ny < 2 || nz < 2) throw ConfigError("tetbox: need at least 2 vertices per side");
  TetMesh mesh;
  mesh.vertices.resize(nx * ny * nz, 3);
  auto id = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        mesh.vertices.row(id(i, j, k)) << sx * i / (nx - 1), sy * j / (ny - 1), sz * k / (nz - 1);
      }
    }
  }
  // Six tets around the main diagonal of each cube (Kuhn subdivision).
  static constexpr int kPaths[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                       {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        for (const auto& path : kPaths) {
          std::array<int, 3> c = {i, j, k};
          std::array<int, 4> tet{};
          tet[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[path[s]];
            tet[s + 1] = id(c[0], c[1], c[2]);
          }
          // Orient positively.
          const Eigen::Vector3d p0 = mesh.vertices.row(tet[0]).transpose();
          const Eigen::Vector3d e1 = mesh.vertices.row(tet[1]).transpose() - p0;
          const Eigen::Vector3d e2 = mesh.vertices.row(tet[2]).transpose() - p0;
          const Eigen::Vector3d e3 = mesh.vertices.row(tet[3]).transpose() - p0;
          if (e1.cross(e2).dot(e3) < 0) std::swap(tet[2], tet[3]);
          mesh.tets.push_back(tet);
        }
      }
    }
  }
  return mesh;
}

std::vector<std::array<int, 3>> boundary_faces(const TetMesh& mesh) {
  std::map<std::array<int, 3>, std::pair<std::array<int, 3>, int>> faces;
  for (const auto& t : mesh.tets) {
    const std::array<std::array<int, 3>, 4> local = {{{t[1], t[2], t[3]},
                                                      {t[0], t[3], t[2]},
                                                      {t[0], t[1], t[3]},
                                                      {t[0], t[2], t[1]}}};
    for (const auto& f : local) {
      std::array<int, 3> key = f;
      std::sort(key.begin(), key.end());
      auto [it, inserted] = faces.try_emplace(key, f, 0);
      ++it->second.second;
    }
  }
  std::vector<std::array<int, 3>> out;
  for (const auto& [key, entry] : faces) {
    if (entry.second == 1) out.push_back(entry.first);
  }
  return out;
}

std::vector<Hinge> interior_hinges(const std::vector<std::array<int, 3>>& triangles) {
  // Directed edge (a, b) -> opposite vertex.
  std::map<std::pair<int, int>, int> opposite;
  for (const auto& t : triangles) {
    for (int k = 0; k < 3; ++k) opposite[{t[k], t[(k + 1) % 3]}] = t[(k + 2) % 3];
  }
  std::vector<Hinge> hinges;
  for (const auto& [edge, v2] : opposite) {
    if (edge.first > edge.second) continue;
    auto twin = opposite.find({edge.second, edge.first});
    if (twin == opposite.end()) continue;
    hinges.push_back({edge.first, edge.second, v2, twin->second});
  }
  return hinges;
}

}  // namespace nsub
