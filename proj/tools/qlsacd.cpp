#include "qlsacd/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return qlsacd::cli::run(argc, argv, std::cout, std::cerr); }
