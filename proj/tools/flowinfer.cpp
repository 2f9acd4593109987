#include <iostream>
#include <string>
#include <vector>

#include "flowinfer/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return flowinfer::run_cli(args, std::cout, std::cerr);
}
