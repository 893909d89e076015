#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return stqr::cli::run(argc, argv, std::cout, std::cerr); }
