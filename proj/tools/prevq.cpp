#include <prevq/cli.hpp>

int main(int argc, char** argv)
{
    return prevq::cli::run(argc, argv);
}
