#include <iostream>

#include "vfr/service/cli.hpp"

int main(int argc, char** argv) { return vfr::run_cli({argv, argv + argc}, std::cout, std::cerr); }
