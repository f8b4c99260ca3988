#include <iostream>
#include <string>
#include <vector>

#include "ikl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ikl::run_cli(args, std::cout, std::cerr);
}
