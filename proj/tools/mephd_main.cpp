#include "mephd/cli.hpp"

int main(int argc, char** argv) {
    return mephd::cli_main(argc, argv);
}
