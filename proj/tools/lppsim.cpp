#include "hlpp/cli.hpp"

int main(int argc, char** argv) { return hlpp::cli::run(argc, argv); }
