#include <string>
#include <vector>

#include "sbtrpo/cli.hpp"

int main(int argc, char** argv) {
    return sbtrpo::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
