#include "geodesy/cli.hpp"

int main(int argc, char** argv) { return geodesy::cli::run_cli(argc, argv); }
