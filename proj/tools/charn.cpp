#include "charn/cli.hpp"

int main(int argc, char** argv) { return charn::cli::run_command(argc, argv); }
