#include <iostream>
#include <string>
#include <vector>

#include "scfo/runner.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return scfo::run_cli(args, std::cout, std::cerr);
}
