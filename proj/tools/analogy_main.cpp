#include <iostream>

#include "analogy/cli.hpp"

int main(int argc, char** argv) {
  return analogy::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
