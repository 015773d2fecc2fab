#include <iostream>

#include "pageguide/cli.hpp"

int main(int argc, char** argv) { return pageguide::cli::run(argc, argv, std::cout, std::cerr, std::cin); }
