#pragma once

#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "agex/core/fs.hpp"
#include "agex/core/hash.hpp"
#include "agex/core/png.hpp"
#include "agex/models/backbone.hpp"
#include "agex/nn/tensor.hpp"
#include "agex/phantom/manifest.hpp"
#include "agex/phantom/render.hpp"

namespace agex {

// Where training and evaluation get pixels for a manifest record.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual GrayImage load(const ManifestRecord& record, int resolution) const = 0;
};

inline std::uint64_t noise_seed_for(const ManifestRecord& record) { return fnv1a64(record.image_id); }

// Renders phantoms on demand. Identity derives from patient_id and noise from
// image_id, so the pixels match what `gen-data` writes for the same manifest.
class PhantomSource final : public ImageSource {
 public:
  explicit PhantomSource(RenderConfig config = {}) : config_(config) {}

  GrayImage load(const ManifestRecord& r, int resolution) const override {
    return render_phantom(PhantomIdentity::from_patient_id(r.patient_id), r.age_years, resolution, noise_seed_for(r),
                          config_);
  }

  const RenderConfig& config() const { return config_; }

 private:
  RenderConfig config_;
};

// Reads 8-bit PNGs relative to a data directory, box-downsampling to the
// requested resolution when the stored image is an integer multiple.
class PngSource final : public ImageSource {
 public:
  explicit PngSource(fs::path root) : root_(std::move(root)) {}

  GrayImage load(const ManifestRecord& r, int resolution) const override {
    return downsample(png::decode_square(read_file(root_ / r.file_path)), resolution);
  }

 private:
  fs::path root_;
};

// Memoizes another source by (image_id, resolution).
class CachedSource final : public ImageSource {
 public:
  explicit CachedSource(const ImageSource& inner) : inner_(inner) {}

  GrayImage load(const ManifestRecord& r, int resolution) const override {
    const auto key = std::make_pair(r.image_id, resolution);
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    GrayImage img = inner_.load(r, resolution);
    std::lock_guard lock(mu_);
    return cache_.emplace(key, std::move(img)).first->second;
  }

  void clear() {
    std::lock_guard lock(mu_);
    cache_.clear();
  }

 private:
  const ImageSource& inner_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::string, int>, GrayImage> cache_;
};

// Images of a set of records stacked into one tensor, with aligned labels.
struct ImageSet {
  nn::Tensor images;
  std::vector<float> ages;
  std::vector<std::string> ids;

  int size() const { return images.n; }
};

inline ImageSet load_image_set(const Manifest& records, const ImageSource& source, int resolution) {
  ImageSet set;
  set.images = nn::Tensor(static_cast<int>(records.size()), 1, resolution, resolution);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const GrayImage img = source.load(records[i], resolution);
    check_resolution(img, resolution);
    std::copy(img.pixels().begin(), img.pixels().end(), set.images.sample(static_cast<int>(i)));
    set.ages.push_back(static_cast<float>(records[i].age_years));
    set.ids.push_back(records[i].image_id);
  }
  return set;
}

}  // namespace agex
