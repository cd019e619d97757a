#include <iostream>
#include <string>
#include <vector>

#include "tal/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return tal::cli::run(args, std::cout, std::cerr);
}
