#include "promptablate/text.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "promptablate/error.hpp"

namespace promptablate {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Backend: return "backend";
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace promptablate

namespace promptablate::text {
namespace {

// Length of the UTF-8 sequence starting at s[i], validating continuation bytes.
std::size_t sequence_length(std::string_view s, std::size_t i) {
  const auto lead = static_cast<unsigned char>(s[i]);
  std::size_t len;
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) len = 2;
  else if ((lead & 0xF0) == 0xE0) len = 3;
  else if ((lead & 0xF8) == 0xF0) len = 4;
  else throw ValidationError("malformed UTF-8: invalid lead byte at offset " + std::to_string(i));
  if (i + len > s.size()) throw ValidationError("malformed UTF-8: truncated sequence at offset " + std::to_string(i));
  for (std::size_t k = 1; k < len; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
      throw ValidationError("malformed UTF-8: bad continuation byte at offset " + std::to_string(i + k));
    }
  }
  return len;
}

}  // namespace

std::size_t codepoint_count(std::string_view utf8) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < utf8.size(); i += sequence_length(utf8, i)) ++n;
  return n;
}

std::size_t byte_offset(std::string_view utf8, std::size_t codepoint_index) {
  std::size_t i = 0;
  for (std::size_t cp = 0; cp < codepoint_index; ++cp) {
    if (i >= utf8.size()) throw ValidationError("code point index out of range");
    i += sequence_length(utf8, i);
  }
  return i;
}

std::string_view slice(std::string_view utf8, std::size_t cp_begin, std::size_t cp_end) {
  const std::size_t b = byte_offset(utf8, cp_begin);
  const std::size_t e = b + byte_offset(utf8.substr(b), cp_end - cp_begin);
  return utf8.substr(b, e - b);
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::string casefold(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace promptablate::text
