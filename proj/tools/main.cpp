#include <iostream>

#include "icprobe/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return icprobe::cli(args, std::cout, std::cerr);
}
