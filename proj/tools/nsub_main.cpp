#include <iostream>

#include "nsub/cli.hpp"

int main(int argc, char** argv) { return nsub::cli_main(argc, argv, std::cout, std::cerr); }
