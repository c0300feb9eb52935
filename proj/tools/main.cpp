#include "sessrec/commands.hpp"

int main(int argc, char** argv) { return sessrec::run_cli(argc, argv); }
