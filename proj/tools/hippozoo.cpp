#include "hippozoo/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hippozoo::cli::run(argc, argv, std::cout, std::cerr); }
