#include <buyback/cli.hpp>

int main(int argc, char** argv) { return buyback::main_entry(argc, argv); }
