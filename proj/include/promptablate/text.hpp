#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace promptablate::text {

// Number of Unicode scalar values in a UTF-8 string. Throws ValidationError
// on malformed input.
std::size_t codepoint_count(std::string_view utf8);

// Byte offset of the given code point index (index == count gives size()).
std::size_t byte_offset(std::string_view utf8, std::size_t codepoint_index);

// Substring addressed in code points.
std::string_view slice(std::string_view utf8, std::size_t cp_begin, std::size_t cp_end);

bool is_space(char c);
std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);

// ASCII case folding; bytes >= 0x80 are left untouched so UTF-8 stays valid.
std::string casefold(std::string_view s);

// Split on runs of ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Reads a UTF-8 file as lines, trimming the trailing "\r" of CRLF files.
std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// 64-bit FNV-1a. Stable across platforms and runs; used for prompt hashes and
// seed derivation.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace promptablate::text
