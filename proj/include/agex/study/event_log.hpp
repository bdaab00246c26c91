#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/fs.hpp"

namespace agex::study {

// Append-only JSON-lines log with sequence numbers. Each append is flushed
// and fsync'd before returning. A torn final line (crash mid-write) is
// dropped on replay; corruption anywhere else is an error.
class EventLog {
 public:
  explicit EventLog(fs::path path) : path_(std::move(path)) {}

  ~EventLog() { close_fd(); }
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  const fs::path& path() const { return path_; }

  static std::vector<nlohmann::json> read(const fs::path& path) {
    std::vector<nlohmann::json> out;
    if (!fs::exists(path)) return out;
    const std::string text = read_file(path);
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      const bool last = end == std::string::npos;
      if (last) end = text.size();
      const std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      if (line.empty()) continue;
      try {
        out.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception&) {
        if (last) break;  // torn tail
        throw IoError("corrupt event log line in " + path.string());
      }
    }
    return out;
  }

  void append(const nlohmann::json& event) {
    open_fd();
    std::string line = event.dump();
    line += '\n';
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      const ssize_t n = ::write(fd_, p, left);
      if (n < 0) throw IoError("cannot append to " + path_.string());
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw IoError("cannot fsync " + path_.string());
  }

  // Replaces the log with an empty file (after a snapshot made it redundant).
  void truncate() {
    close_fd();
    write_file_atomic(path_, "");
  }

 private:
  void open_fd() {
    if (fd_ >= 0) return;
    // A torn tail from an earlier crash must not swallow the next record.
    if (fs::exists(path_)) {
      const std::string text = read_file(path_);
      if (!text.empty() && text.back() != '\n') {
        const auto cut = text.rfind('\n');
        write_file_atomic(path_, cut == std::string::npos ? std::string() : text.substr(0, cut + 1));
      }
    }
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open " + path_.string());
  }

  void close_fd() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  fs::path path_;
  int fd_ = -1;
};

}  // namespace agex::study
