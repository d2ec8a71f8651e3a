#include "affect/cli/cli.hpp"

int main(int argc, char** argv) { return affect::cli::run(argc, argv); }
