#include <iostream>
#include <string>
#include <vector>

#include "xgan/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return xgan::run_cli(args, std::cout, std::cerr);
}
