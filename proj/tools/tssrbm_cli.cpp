#include <tssrbm/cli.hpp>

#include <iostream>

int main(int argc, char** argv) {
  return tssrbm::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
