#pragma once

// Oracle suites run by `lgl check`. Each suite compares production routines
// against the independent references in lgl::oracle, or asserts an
// algebraic identity between estimators.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lgl::cli {

struct SuiteResult {
    std::string name;
    int passed = 0;
    int failed = 0;
};

struct CheckOptions {
    std::optional<std::string> suite; // run only this suite
    // Negative control: deliberately corrupt one routine ("simplex" or
    // "polytope") so that its suite must fail.
    std::optional<std::string> inject_fault;
    std::uint64_t seed = 20240611;
    int max_reported_failures = 3;
};

const std::vector<std::string>& suite_names();

// Throws ConfigError for an unknown suite or fault name.
std::vector<SuiteResult> run_checks(const CheckOptions& options, std::ostream& log);

} // namespace lgl::cli
