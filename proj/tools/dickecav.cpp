#include <string>
#include <vector>

#include "dickecav/cli.hpp"

int main(int argc, char** argv) {
    return dickecav::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
