#include "osrue/cli.hpp"

int main(int argc, char** argv) { return osrue::cli::run(argc, argv); }
