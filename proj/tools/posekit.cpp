#include <iostream>

#include "posekit/cli.hpp"

int main(int argc, char** argv) { return posekit::run_cli(argc, argv, std::cout, std::cerr); }
