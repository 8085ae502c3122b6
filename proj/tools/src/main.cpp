#include <iostream>
#include <string>
#include <vector>

#include "genad/cli.hpp"
#include "genad/runtime.hpp"

int main(int argc, char** argv) {
  genad::tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return genad::cli::run(args, std::cout, std::cerr);
}
