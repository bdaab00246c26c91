#pragma once

#include <cstdio>
#include <cstring>
#include <map>
#include <string>
#include <string_view>

#include "agex/core/error.hpp"

namespace agex::tar {

// POSIX ustar archive with regular-file members only. Member order is
// preserved on write; mtime/uid/gid are zeroed so archives are reproducible.
class Writer {
 public:
  void add(std::string_view name, std::string_view data) {
    if (name.empty() || name.size() > 99) throw ValidationError("tar member name must be 1..99 bytes");
    char header[512];
    std::memset(header, 0, sizeof header);
    std::memcpy(header, name.data(), name.size());
    std::snprintf(header + 100, 8, "%07o", 0644);
    std::snprintf(header + 108, 8, "%07o", 0);
    std::snprintf(header + 116, 8, "%07o", 0);
    std::snprintf(header + 124, 12, "%011llo", static_cast<unsigned long long>(data.size()));
    std::snprintf(header + 136, 12, "%011o", 0);
    header[156] = '0';
    std::memcpy(header + 257, "ustar", 6);
    std::memcpy(header + 263, "00", 2);
    std::memset(header + 148, ' ', 8);
    unsigned sum = 0;
    for (unsigned char c : header) sum += c;
    std::snprintf(header + 148, 8, "%06o", sum);
    header[155] = ' ';
    out_.append(header, sizeof header);
    out_.append(data);
    out_.append((512 - data.size() % 512) % 512, '\0');
  }

  std::string finish() {
    out_.append(1024, '\0');
    return std::move(out_);
  }

 private:
  std::string out_;
};

inline std::map<std::string, std::string> read(std::string_view archive) {
  std::map<std::string, std::string> members;
  std::size_t pos = 0;
  while (pos + 512 <= archive.size()) {
    const char* h = archive.data() + pos;
    if (h[0] == '\0') break;
    unsigned expected = 0;
    for (int i = 0; i < 512; ++i) {
      expected += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(h[i]);
    }
    unsigned stored = static_cast<unsigned>(std::strtoul(std::string(h + 148, 8).c_str(), nullptr, 8));
    if (stored != expected) throw IoError("tar header checksum mismatch");
    std::string name(h, strnlen(h, 100));
    std::size_t size = std::strtoull(std::string(h + 124, 12).c_str(), nullptr, 8);
    pos += 512;
    if (pos + size > archive.size()) throw IoError("truncated tar member " + name);
    if (h[156] == '0' || h[156] == '\0') members.emplace(name, std::string(archive.substr(pos, size)));
    pos += (size + 511) / 512 * 512;
  }
  return members;
}

}  // namespace agex::tar
