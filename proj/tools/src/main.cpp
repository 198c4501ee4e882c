#include "meanfield_cli/commands.hpp"

int main(int argc, char** argv) { return meanfield::cli::run_cli(argc, argv); }
