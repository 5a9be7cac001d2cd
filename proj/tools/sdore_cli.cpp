#include "sdore/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sdore::cli::run_main(argc, argv, std::cout, std::cerr); }
