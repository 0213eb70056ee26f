#include "kicktop/cli.hpp"

int main(int argc, char** argv) { return kicktop::cli::run(argc, argv); }
