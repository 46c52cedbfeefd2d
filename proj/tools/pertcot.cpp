#include <iostream>
#include <string>
#include <vector>

#include "pertcot/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pertcot::cli::run(args, std::cout, std::cerr);
}
