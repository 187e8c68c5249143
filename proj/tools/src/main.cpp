#include <iostream>

#include "dsnet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dsnet::cli::run(args, std::cout, std::cerr);
}
