#include "cli/app.hpp"

int main(int argc, char** argv) { return panelci::cli::run(argc, argv); }
