#include "gridest/cli/cli.hpp"

int main(int argc, char** argv) { return gridest::cli::run(argc, argv); }
