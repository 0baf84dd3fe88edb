#include "cli_app.hpp"

int main(int argc, char** argv) { return panelardl::cli::run(argc, argv); }
