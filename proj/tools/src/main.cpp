#include "cli.hpp"

int main(int argc, char** argv) { return transit::cli::run_command(argc, argv); }
