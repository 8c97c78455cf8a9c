#pragma once
#include <cstdio>
#include <string>

namespace masgan {

// Round-trip-exact double formatting shared by every CSV/JSON writer so that
// repeated runs emit byte-identical artifacts.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_file(const std::string& path);

// Write to <path>.tmp then rename; readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string utc_timestamp_now();

} // namespace masgan
