#include <string>
#include <vector>

#include "textcnn/service/cli.hpp"

int main(int argc, char** argv) {
    return textcnn::cli::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
