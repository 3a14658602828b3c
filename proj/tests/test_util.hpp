#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "selbench/errors.hpp"

namespace test_util {

// Unique scratch directory, removed on destruction.
class ScratchDir {
public:
    ScratchDir() {
        static std::atomic<unsigned> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        std::ostringstream name;
        name << "selbench_test_" << ::getpid() << '_' << counter.fetch_add(1);
        path_ = base / name.str();
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    if (!out) throw selbench::IoError("test: cannot write " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw selbench::IoError("test: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace test_util
