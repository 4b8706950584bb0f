#include <iostream>

#include "fdf/cli.hpp"

int main(int argc, char** argv) { return fdf::cli_main(argc, argv, std::cout, std::cerr); }
