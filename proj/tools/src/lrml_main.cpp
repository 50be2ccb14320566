#include <iostream>

#include "lrml_cli/commands.hpp"

int main(int argc, char** argv) { return lrml::cli::run(argc, argv, std::cout, std::cerr); }
