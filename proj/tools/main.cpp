#include <vector>

#include "hypolab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hypolab::run_cli(args);
}
