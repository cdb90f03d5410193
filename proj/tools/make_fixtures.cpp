// Writes the cross-check fixtures into a directory (default data/fixtures).
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nsub/io/fixtures.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data/fixtures";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "web_forward.json") << nsub::web_forward_fixture().dump(1) << "\n";
  std::ofstream(dir / "catmull_rom.json") << nsub::spline_fixture().dump(1) << "\n";
  std::cout << "wrote fixtures to " << dir.string() << "\n";
}
