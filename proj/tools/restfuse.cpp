#include "restfuse/cli.hpp"

int main(int argc, char** argv) { return restfuse::cli::run_cli(argc, argv); }
