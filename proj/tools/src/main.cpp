#include "corticarve_cli/cli.hpp"

int main(int argc, char** argv) { return corticarve::cli::run(argc, argv); }
