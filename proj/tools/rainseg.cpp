#include <iostream>
#include <string>
#include <vector>

#include "rainseg/cli/cli.hpp"

int main(int argc, char** argv) {
  return rainseg::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
