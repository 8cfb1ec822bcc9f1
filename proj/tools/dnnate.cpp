#include <iostream>
#include <string>
#include <vector>

#include "dnnate/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dnnate::cli::run(args, std::cout, std::cerr);
}
