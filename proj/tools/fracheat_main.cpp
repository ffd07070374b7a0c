#include <iostream>
#include <string>
#include <vector>

#include "fracheat/runner.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fracheat::run_cli(args, std::cout, std::cerr);
}
