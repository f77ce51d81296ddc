#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "pairvc/cli/config.hpp"

// Locates the repository root so tests can run from the build tree or from
// the source dir. ctest sets PAIRVC_ROOT; direct invocation walks upward.
inline std::string repo_root() {
    if (const char* r = std::getenv("PAIRVC_ROOT")) return r;
    namespace fs = std::filesystem;
    fs::path p = fs::current_path();
    for (int i = 0; i < 6; ++i) {
        if (fs::exists(p / "data" / "vocab.json")) return p.string();
        if (!p.has_parent_path()) break;
        p = p.parent_path();
    }
    return ".";
}

inline pairvc::cli::RunConfig test_config() {
    return pairvc::cli::load_config(repo_root() + "/configs/default.json");
}

// Fresh scratch directory per tag; wiped on entry so reruns start clean.
inline std::filesystem::path temp_dir(const std::string& tag) {
    auto d = std::filesystem::temp_directory_path() / ("pairvc_test_" + tag);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}
