#include <iostream>

#include "cli.hpp"
#include "ngraph/util/allocator.hpp"

int main(int argc, char** argv) {
  ngraph::util::retain_freed_memory();
  std::vector<std::string> args(argv + 1, argv + argc);
  return ngraph::cli::run(args, std::cout, std::cerr);
}
