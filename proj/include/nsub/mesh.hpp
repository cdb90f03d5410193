#pragma once

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <vector>

namespace nsub {

// Row i holds vertex i. Two columns for planar meshes, three otherwise.
using VertexMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TriMesh {
  VertexMatrix vertices;
  std::vector<std::array<int, 3>> triangles;

  int dim() const { return static_cast<int>(vertices.cols()); }
  int vertex_count() const { return static_cast<int>(vertices.rows()); }
};

struct TetMesh {
  VertexMatrix vertices;  // nv x 3
  std::vector<std::array<int, 4>> tets;

  int vertex_count() const { return static_cast<int>(vertices.rows()); }
};

// Triangles of an OBJ file; polygons are fan-triangulated. With planar=true
// the z coordinate is dropped.
TriMesh load_obj(const std::filesystem::path& path, bool planar = false);
void save_obj(const std::filesystem::path& path, const TriMesh& mesh);

// ASCII format: "tet <nv> <nt>", then nv lines "v x y z", then nt lines
// "t i j k l" with zero-based indices.
TetMesh load_tet(const std::filesystem::path& path);
void save_tet(const std::filesystem::path& path, const TetMesh& mesh);

// Planar rectangle [0,width] x [0,height] with nx x ny vertices, each cell
// split into two triangles along alternating diagonals.
TriMesh make_grid_2d(int nx, int ny, double width, double height);

// Sheet in the xz-plane at y = 0, nx x nz vertices.
TriMesh make_sheet(int nx, int nz, double width, double depth);

// Box [0,sx] x [0,sy] x [0,sz] with nx x ny x nz vertices, each cube split
// into six tetrahedra.
TetMesh make_tet_box(int nx, int ny, int nz, double sx, double sy, double sz);

// Boundary triangles of a tet mesh, outward oriented.
std::vector<std::array<int, 3>> boundary_faces(const TetMesh& mesh);

// Indices of faces that share an interior edge: (v0, v1) is the shared edge,
// v2 and v3 the opposite vertices of the two faces.
struct Hinge {
  int v0, v1, v2, v3;
};
std::vector<Hinge> interior_hinges(const std::vector<std::array<int, 3>>& triangles);

}  // namespace nsub
