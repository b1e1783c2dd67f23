#include <iostream>

#include "semaforge/cli.hpp"

int main(int argc, char** argv) {
  return semaforge::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
