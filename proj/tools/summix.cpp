#include "summix/cli/run_command.hpp"

int main(int argc, char** argv) { return summix::cli::run_command(argc, argv); }
