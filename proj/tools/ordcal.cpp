#include "ordcal/cli.hpp"

int main(int argc, char** argv) { return ordcal::cli::run(argc, argv); }
