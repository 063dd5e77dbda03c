#include "cli.hpp"

int main(int argc, char** argv) { return cag::cli::run(argc, argv); }
