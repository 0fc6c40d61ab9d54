#include <iostream>

#include "tbstream/app/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tbstream::app::dispatch(args, std::cout, std::cerr);
}
