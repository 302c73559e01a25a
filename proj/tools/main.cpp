#include <iostream>
#include <string>
#include <vector>

#include "crowdwise/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return crowdwise::cli::run(args, std::cout, std::cerr);
}
