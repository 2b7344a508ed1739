#include "prescriptor/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return prescriptor::cli::run(argc, argv, std::cout, std::cerr); }
