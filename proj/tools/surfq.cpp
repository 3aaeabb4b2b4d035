#include "cli.hpp"

int main(int argc, char** argv) { return surfq::cli::run(argc, argv); }
