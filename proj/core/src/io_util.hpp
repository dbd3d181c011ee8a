#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "masklab/error.hpp"

namespace masklab::detail {

/// Shortest exact decimal form a double round-trips from (%.17g).
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path, const char* what) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(std::string(what) + ": cannot open \"" + path + "\" for writing");
    }
    return out;
}

inline std::ifstream open_in(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(std::string(what) + ": cannot open \"" + path + "\"");
    }
    return in;
}

}  // namespace masklab::detail
