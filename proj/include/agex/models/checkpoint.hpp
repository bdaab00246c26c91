#pragma once

#include <bit>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/fs.hpp"
#include "agex/core/hash.hpp"
#include "agex/core/tar.hpp"

namespace agex {

static_assert(std::endian::native == std::endian::little, "params.bin is stored little-endian");

// Self-describing model container: a ustar archive holding `meta.json`
// (architecture, head, resolution, labels, config hash, parameter layout)
// and `params.bin` (float32 values in layout order).
struct Checkpoint {
  nlohmann::json meta;
  std::vector<float> params;

  std::string to_archive() const {
    tar::Writer w;
    w.add("meta.json", meta.dump(2) + "\n");
    std::string blob(params.size() * sizeof(float), '\0');
    if (!params.empty()) std::memcpy(blob.data(), params.data(), blob.size());
    w.add("params.bin", blob);
    return w.finish();
  }

  static Checkpoint from_archive(std::string_view bytes) {
    auto members = tar::read(bytes);
    auto meta = members.find("meta.json");
    auto blob = members.find("params.bin");
    if (meta == members.end() || blob == members.end()) {
      throw IoError("checkpoint archive lacks meta.json or params.bin");
    }
    Checkpoint ck;
    try {
      ck.meta = nlohmann::json::parse(meta->second);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("checkpoint meta.json is not valid JSON: ") + e.what());
    }
    if (blob->second.size() % sizeof(float) != 0) throw IoError("params.bin size is not a multiple of 4");
    ck.params.resize(blob->second.size() / sizeof(float));
    if (!ck.params.empty()) std::memcpy(ck.params.data(), blob->second.data(), blob->second.size());
    if (ck.meta.value("format", "") != "agex-checkpoint") throw IoError("not an agex checkpoint");
    return ck;
  }

  void save(const fs::path& path) const { write_file_atomic(path, to_archive()); }
  static Checkpoint load(const fs::path& path) { return from_archive(read_file(path)); }

  std::string kind() const { return meta.value("kind", ""); }
};

inline std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

}  // namespace agex
