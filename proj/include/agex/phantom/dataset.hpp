#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/fs.hpp"
#include "agex/core/png.hpp"
#include "agex/phantom/manifest.hpp"
#include "agex/phantom/render.hpp"
#include "agex/phantom/splits.hpp"

namespace agex {

// A generated dataset directory:
//   dataset.json   generation parameters
//   manifest.csv   one row per image
//   splits.json    patient-disjoint train/val/test image ids
//   images/*.png   8-bit grayscale renders
struct DatasetOptions {
  ManifestOptions manifest{};
  RenderConfig render{};
  int resolution = 64;
  double train_frac = 0.8;
  double val_frac = 0.1;
};

struct Dataset {
  fs::path dir;
  nlohmann::json meta;
  Manifest manifest;
  SplitSpec splits;

  int resolution() const { return meta.at("resolution").get<int>(); }
};

inline nlohmann::json splits_to_json(const SplitSpec& s) {
  return {{"train", s.train_ids}, {"val", s.val_ids}, {"test", s.test_ids}};
}

inline SplitSpec splits_from_json(const nlohmann::json& j) {
  SplitSpec s;
  s.train_ids = j.at("train").get<std::set<std::string>>();
  s.val_ids = j.at("val").get<std::set<std::string>>();
  s.test_ids = j.at("test").get<std::set<std::string>>();
  return s;
}

// Deterministic: the same options always produce byte-identical files.
inline Dataset write_dataset(const fs::path& dir, const DatasetOptions& opt) {
  if (!is_supported_resolution(opt.resolution)) {
    throw ConfigError("unsupported resolution " + std::to_string(opt.resolution));
  }
  Dataset ds;
  ds.dir = dir;
  ds.manifest = build_manifest(opt.manifest);
  ds.splits = make_splits(ds.manifest, opt.train_frac, opt.val_frac, opt.manifest.seed);
  ds.meta = {{"format", "agex-dataset"},
             {"resolution", opt.resolution},
             {"n_patients", opt.manifest.n_patients},
             {"n_images", ds.manifest.size()},
             {"multi_scan_fraction", opt.manifest.multi_scan_fraction},
             {"age_mean", opt.manifest.age_mean},
             {"age_sd", opt.manifest.age_sd},
             {"seed", opt.manifest.seed},
             {"noise_sd", opt.render.noise_sd},
             {"abnormality_scale", opt.render.abnormality_scale},
             {"train_frac", opt.train_frac},
             {"val_frac", opt.val_frac}};
  for (const auto& r : ds.manifest) {
    const GrayImage img = render_phantom(PhantomIdentity::from_patient_id(r.patient_id), r.age_years, opt.resolution,
                                         fnv1a64(r.image_id), opt.render);
    write_file_atomic(dir / r.file_path, png::encode(img));
  }
  write_file_atomic(dir / "manifest.csv", write_manifest_csv(ds.manifest));
  write_file_atomic(dir / "splits.json", splits_to_json(ds.splits).dump(1) + "\n");
  write_file_atomic(dir / "dataset.json", ds.meta.dump(2) + "\n");
  return ds;
}

inline Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "dataset.json")) throw NotFoundError(dir.string() + " is not a dataset (no dataset.json)");
  Dataset ds;
  ds.dir = dir;
  try {
    ds.meta = nlohmann::json::parse(read_file(dir / "dataset.json"));
    ds.splits = splits_from_json(nlohmann::json::parse(read_file(dir / "splits.json")));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt dataset metadata in " + dir.string() + ": " + e.what());
  }
  ds.manifest = read_manifest_csv(read_file(dir / "manifest.csv"));
  return ds;
}

}  // namespace agex
