#include <iostream>

#include "gda/cli.hpp"

int main(int argc, char** argv) {
  return gda::cli::main(argc, argv, std::cout, std::cerr);
}
