#include "cedn/cli/app.hpp"

int main(int argc, char** argv) { return cedn::cli::run_app(argc, argv); }
