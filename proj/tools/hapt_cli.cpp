#include "hapt/app.hpp"

int main(int argc, char** argv) { return hapt::app::run(argc, argv); }
