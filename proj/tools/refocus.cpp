#include "refocus/cli.hpp"

int main(int argc, char** argv) { return refocus::cli::run_cli(argc, argv); }
