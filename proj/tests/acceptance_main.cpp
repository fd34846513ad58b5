#include "cmdp/acceptance.hpp"

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::stoi(argv[i]));
    const auto results = cmdp::run_acceptance(only, &std::cout);
    int failed = 0;
    for (const auto& r : results) failed += r.passed ? 0 : 1;
    std::cout << (results.size() - failed) << "/" << results.size() << " criteria passed" << std::endl;
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
