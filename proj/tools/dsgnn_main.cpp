#include "dsgnn/cli.hpp"

int main(int argc, char** argv) { return dsgnn::run_cli(argc, argv); }
