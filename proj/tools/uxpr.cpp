#include "uxpr/cli.hpp"

int main(int argc, char** argv) { return uxpr::cli::run(argc, argv); }
