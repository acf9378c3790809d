#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace drnet {

// Filesystem / format failures. The CLI maps this to exit code 2 and
// validation errors (std::invalid_argument & friends) to exit code 1.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Round-trip-exact double formatting for data files.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);
double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);

}  // namespace drnet
