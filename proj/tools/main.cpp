#include <iostream>

#include "elpf/cli.hpp"

int main(int argc, char** argv) { return elpf::run_cli({argv + 1, argv + argc}, std::cout, std::cerr); }
