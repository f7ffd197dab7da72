#include "cli.hpp"

int main(int argc, char** argv) { return semb::cli::run(argc, argv); }
