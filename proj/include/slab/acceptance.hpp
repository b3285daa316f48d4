#pragma once

// The acceptance suite: one check per criterion, shared by the acceptance
// binary and the `verify` subcommand.

#include <filesystem>
#include <string>
#include <vector>

namespace slab {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

inline constexpr int kNumCriteria = 9;

/// Runs criterion `id` (1..9). Scratch files for criterion 9 go to `workdir`.
CriterionResult run_criterion(int id, const std::filesystem::path& workdir);

/// "criterion N: PASS|FAIL  title: detail (x.x s)"
std::string format_result(const CriterionResult& r);

}  // namespace slab
