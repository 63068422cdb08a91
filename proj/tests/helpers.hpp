#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

namespace test_helpers {

inline std::filesystem::path source_dir() { return MOODANGELS_SOURCE_DIR; }
inline std::filesystem::path data_path(const std::string& name) { return source_dir() / "data" / name; }
inline std::filesystem::path fixture_path(const std::string& name) {
    return source_dir() / "fixtures" / name;
}

// fresh scratch directory per test binary run
inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("moodangels_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace test_helpers
