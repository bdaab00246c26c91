#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/models/heads.hpp"
#include "agex/phantom/render.hpp"

namespace agex {

struct TrainConfig {
  int resolution = 64;
  int batch_size = 64;
  double initial_lr = 0.001;
  double plateau_factor = 0.5;
  int plateau_patience_epochs = 3;
  int max_epochs = 30;
  std::uint64_t seed = 0;
  HeadType head = HeadType::regression;
  std::optional<int> train_set_size_cap;

  void validate() const {
    if (!is_supported_resolution(resolution)) throw ConfigError("unsupported resolution " + std::to_string(resolution));
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("plateau_factor must lie in (0,1)");
    if (plateau_patience_epochs < 1) throw ConfigError("plateau_patience_epochs must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (head == HeadType::ensemble) throw ConfigError("ensemble is not a trainable head");
    if (train_set_size_cap && *train_set_size_cap < 1) throw ConfigError("train_set_size_cap must be >= 1");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"resolution", resolution},
                        {"batch_size", batch_size},
                        {"initial_lr", initial_lr},
                        {"plateau_factor", plateau_factor},
                        {"plateau_patience_epochs", plateau_patience_epochs},
                        {"max_epochs", max_epochs},
                        {"seed", seed},
                        {"head", std::string(to_string(head))},
                        {"train_set_size_cap", nullptr}};
    if (train_set_size_cap) j["train_set_size_cap"] = *train_set_size_cap;
    return j;
  }

  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known{"resolution", "batch_size", "initial_lr", "plateau_factor",
                                                "plateau_patience_epochs", "max_epochs", "seed", "head",
                                                "train_set_size_cap"};
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ConfigError("unknown train config key '" + key + "'");
      }
    }
    TrainConfig c;
    try {
      c.resolution = j.value("resolution", c.resolution);
      c.batch_size = j.value("batch_size", c.batch_size);
      c.initial_lr = j.value("initial_lr", c.initial_lr);
      c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
      c.plateau_patience_epochs = j.value("plateau_patience_epochs", c.plateau_patience_epochs);
      c.max_epochs = j.value("max_epochs", c.max_epochs);
      c.seed = j.value("seed", c.seed);
      if (j.contains("head")) c.head = parse_head(j.at("head").get<std::string>());
      if (j.contains("train_set_size_cap") && !j.at("train_set_size_cap").is_null()) {
        c.train_set_size_cap = j.at("train_set_size_cap").get<int>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad train config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_mae = 0;  // validation MAE in years (ranking models: pair error rate)
  double lr = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int selected_epoch = -1;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "epoch,train_loss,val_mae,lr\n";
    for (const auto& e : epochs) os << e.epoch << ',' << e.train_loss << ',' << e.val_mae << ',' << e.lr << '\n';
    return os.str();
  }
};

}  // namespace agex
