// Prints one PASS/FAIL line per acceptance criterion. Arguments select
// criteria (default: all); exit status is 0 only when every selected one passes.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "slab/acceptance.hpp"

int main(int argc, char** argv) {
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) {
        const int id = std::atoi(argv[i]);
        if (id < 1 || id > slab::kNumCriteria) {
            std::cerr << "usage: slab_acceptance [criterion ...]  (criteria 1.." << slab::kNumCriteria << ")\n";
            return 2;
        }
        ids.push_back(id);
    }
    if (ids.empty())
        for (int i = 1; i <= slab::kNumCriteria; ++i) ids.push_back(i);

    const auto work = std::filesystem::temp_directory_path() / "slab_acceptance";
    std::filesystem::create_directories(work);
    int failed = 0;
    for (int id : ids) {
        const auto r = slab::run_criterion(id, work);
        std::cout << slab::format_result(r) << std::endl;
        failed += !r.pass;
    }
    std::cout << (ids.size() - failed) << " of " << ids.size() << " criteria pass" << std::endl;
    return failed == 0 ? 0 : 1;
}
