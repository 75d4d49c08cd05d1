#include "polc/cli.hpp"

int main(int argc, char** argv) { return polc::cli::run(argc, argv); }
