#include <iostream>

#include "litept/cli.hpp"

int main(int argc, char** argv) {
  return litept::cli::run(argc, argv, std::cout, std::cerr);
}
