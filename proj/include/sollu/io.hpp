#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "error.hpp"

namespace sollu {

// Write to a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content)
{
    namespace fs = std::filesystem;
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    static thread_local std::mt19937_64 tag(std::random_device{}());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(tag() & 0xffffff);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + tmp.string());
        out.write(content.data(), std::streamsize(content.size()));
        if (!out)
            throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot rename " + tmp.string() + ": " + ec.message());
    }
}

inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Shortest text that parses back to the same double.
inline std::string format_exact(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline std::string format_fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string_view trim(std::string_view s)
{
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto p = s.find(sep, start);
        out.emplace_back(trim(s.substr(start, p == std::string_view::npos ? p : p - start)));
        if (p == std::string_view::npos)
            break;
        start = p + 1;
    }
    return out;
}

inline double parse_double(std::string_view s)
{
    s = trim(s);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error("not a number: '" + std::string(s) + "'");
    return v;
}

inline long parse_int(std::string_view s)
{
    s = trim(s);
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error("not an integer: '" + std::string(s) + "'");
    return v;
}

} // namespace sollu
