// agex: command-line entry point for data generation, training, the GAN,
// the reader study service and analysis.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "agex/core/error.hpp"
#include "agex/core/fs.hpp"
#include "agex/core/png.hpp"
#include "agex/gan/analysis.hpp"
#include "agex/gan/train_gan.hpp"
#include "agex/models/age_model.hpp"
#include "agex/models/rank_model.hpp"
#include "agex/phantom/dataset.hpp"
#include "agex/stats/log_fit.hpp"
#include "agex/stats/study_summary.hpp"
#include "agex/study/model_participant.hpp"
#include "agex/study/schedule.hpp"
#include "agex/study/server.hpp"
#include "agex/study/store.hpp"
#include "agex/training/pairs.hpp"
#include "agex/training/sweep.hpp"
#include "agex/training/train_age.hpp"
#include "agex/training/train_rank.hpp"

namespace {

using namespace agex;
using json = nlohmann::json;

bool g_quiet = false;

void log(const std::string& msg) {
  if (!g_quiet) std::cerr << "agex: " << msg << std::endl;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void log_epoch(const EpochRecord& e) {
  log("epoch " + std::to_string(e.epoch) + " loss " + fmt("%.4f", e.train_loss) + " val " + fmt("%.4f", e.val_mae) +
      " lr " + fmt("%.2e", e.lr));
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError("list", "not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw CLI::ValidationError("list", "empty list");
  return out;
}

TrainConfig train_config_from(const std::string& config_path) {
  if (config_path.empty()) return {};
  try {
    return TrainConfig::from_json(json::parse(read_file(config_path)));
  } catch (const json::exception& e) {
    throw ConfigError(config_path + ": " + e.what());
  }
}

// Checks that a dataset holds images at least as large as the model needs.
void check_data_resolution(const Dataset& ds, int resolution) {
  if (ds.resolution() < resolution || ds.resolution() % resolution != 0) {
    throw ConfigError("dataset images are " + std::to_string(ds.resolution()) + "^2; cannot serve " +
                      std::to_string(resolution) + "^2 model inputs");
  }
}

struct Common {
  std::uint64_t seed = 0;
};

// ---- gen-data

struct GenData {
  int n_patients = 1000;
  double multi = 0.28;
  double abnormality = 1.0;
  double noise = 0.02;
  int resolution = 64;
  std::string out;
};

int run_gen_data(const GenData& a, const Common& c) {
  DatasetOptions o;
  o.manifest.n_patients = a.n_patients;
  o.manifest.multi_scan_fraction = a.multi;
  o.manifest.seed = c.seed;
  o.render.abnormality_scale = a.abnormality;
  o.render.noise_sd = a.noise;
  o.resolution = a.resolution;
  const Dataset ds = write_dataset(a.out, o);
  log("wrote " + std::to_string(ds.manifest.size()) + " images to " + a.out);
  return 0;
}

// ---- train

struct Train {
  std::string data;
  std::string out;
  std::string config;
  std::string head = "regression";
  int resolution = 0;
  int epochs = 0;
  int batch = 0;
  double lr = 0;
  int cap = 0;
};

TrainConfig apply_overrides(TrainConfig tc, const Train& a, const Common& c, bool seed_given) {
  if (!a.head.empty()) tc.head = parse_head(a.head);
  if (a.resolution) tc.resolution = a.resolution;
  if (a.epochs) tc.max_epochs = a.epochs;
  if (a.batch) tc.batch_size = a.batch;
  if (a.lr > 0) tc.initial_lr = a.lr;
  if (a.cap) tc.train_set_size_cap = a.cap;
  if (seed_given || a.config.empty()) tc.seed = c.seed;
  tc.validate();
  return tc;
}

int run_train(const Train& a, const Common& c, bool seed_given) {
  const TrainConfig tc = apply_overrides(train_config_from(a.config), a, c, seed_given);
  const Dataset ds = load_dataset(a.data);
  check_data_resolution(ds, tc.resolution);
  PngSource png(ds.dir);
  CachedSource source(png);
  log("training " + std::string(to_string(tc.head)) + " head at " + std::to_string(tc.resolution) + "^2");
  auto result = train_age_model(tc, ds.manifest, ds.splits, source, nullptr, log_epoch);
  const ImageSet test = load_image_set(select(ds.manifest, ds.splits, SplitPart::test), source, tc.resolution);
  const auto pred = predict_ages(result.model, test.images);
  std::vector<double> truth(test.ages.begin(), test.ages.end());
  const auto metrics = stats::point_metrics(pred, truth);
  const fs::path out(a.out);
  result.model.to_checkpoint(tc.to_json()).save(out / "model.ckpt");
  write_file_atomic(out / "history.csv", result.history.to_csv());
  json m = stats::to_json(metrics);
  m["selected_epoch"] = result.history.selected_epoch;
  write_file_atomic(out / "metrics.json", m.dump(2) + "\n");
  log("test MAE " + fmt("%.3f", metrics.mae) + " years; wrote " + a.out);
  return 0;
}

// ---- train-rank

struct TrainRank {
  Train base;
  int pairs = 4000;
  int val_pairs = 500;
  double same_patient = 0.5;
};

int run_train_rank(const TrainRank& a, const Common& c, bool seed_given) {
  Train b = a.base;
  b.head = "regression";
  const TrainConfig tc = apply_overrides(train_config_from(b.config), b, c, seed_given);
  const Dataset ds = load_dataset(b.data);
  check_data_resolution(ds, tc.resolution);
  PngSource png(ds.dir);
  CachedSource source(png);
  const auto train = sample_pairs(ds.manifest, ds.splits, SplitPart::train, a.pairs, a.same_patient, tc.seed);
  const auto val = sample_pairs(ds.manifest, ds.splits, SplitPart::val, a.val_pairs, a.same_patient,
                                derive_seed(tc.seed, 1));
  if (train.fell_back_to_cross_patient || val.fell_back_to_cross_patient) {
    log("warning: too few multi-scan patients; cross-patient pairs filled the same-patient share");
  }
  auto result = train_ranking_model(tc, train.pairs, val.pairs, ds.manifest, source, nullptr, log_epoch);
  const auto test = sample_pairs(ds.manifest, ds.splits, SplitPart::test, a.val_pairs, a.same_patient,
                                 derive_seed(tc.seed, 2));
  const PairImages timg = PairImages::load(test.pairs, ds.manifest, source, tc.resolution);
  const double acc = pair_accuracy(result.model, test.pairs, timg);
  json cfg = tc.to_json();
  cfg["pairs"] = a.pairs;
  cfg["same_patient_fraction"] = a.same_patient;
  const fs::path out(b.out);
  result.model.to_checkpoint(cfg).save(out / "model.ckpt");
  write_file_atomic(out / "history.csv", result.history.to_csv());
  write_file_atomic(out / "metrics.json",
                    json{{"test_pair_accuracy", acc}, {"selected_epoch", result.history.selected_epoch}}.dump(2) + "\n");
  log("test pair accuracy " + fmt("%.4f", acc) + "; wrote " + b.out);
  return 0;
}

// ---- sweep

struct Sweep {
  Train base;
  std::string sizes = "1000,4000,16000";
};

int run_sweep(const Sweep& a, const Common& c, bool seed_given) {
  const TrainConfig tc = apply_overrides(train_config_from(a.base.config), a.base, c, seed_given);
  const Dataset ds = load_dataset(a.base.data);
  check_data_resolution(ds, tc.resolution);
  std::vector<int> sizes;
  for (double v : parse_list(a.sizes)) sizes.push_back(static_cast<int>(v));
  PngSource png(ds.dir);
  CachedSource source(png);
  const auto points = dataset_size_sweep(tc, ds.manifest, ds.splits, sizes, source);
  std::ostringstream csv;
  csv << "train_size,test_mae\n";
  std::vector<double> ns;
  std::vector<double> maes;
  for (const auto& p : points) {
    csv << p.size << ',' << fmt("%.6f", p.test_mae) << '\n';
    ns.push_back(p.size);
    maes.push_back(p.test_mae);
    log("size " + std::to_string(p.size) + " test MAE " + fmt("%.3f", p.test_mae));
  }
  const fs::path out(a.base.out);
  write_file_atomic(out / "sweep.csv", csv.str());
  json fit = nullptr;
  if (points.size() >= 2) {
    const auto f = stats::log_fit(ns, maes);
    fit = {{"a", f.a}, {"b", f.b}, {"rmse", f.rmse}};
  }
  write_file_atomic(out / "fit.json", json{{"model", "mae = a + b ln(n)"}, {"fit", fit}}.dump(2) + "\n");
  return 0;
}

// ---- train-gan

struct TrainGan {
  std::string predictor;
  std::string data;
  std::string out;
  double lambda = 0.05;
  int steps = 20000;
  int batch = 16;
  double lr = 2e-4;
};

int run_train_gan(const TrainGan& a, const Common& c) {
  const AgeModel m = AgeModel::from_checkpoint(Checkpoint::load(a.predictor));
  const Dataset ds = load_dataset(a.data);
  check_data_resolution(ds, m.resolution());
  gan::GanConfig gc;
  gc.resolution = m.resolution();
  gc.generator.resolution = m.resolution();
  gc.generator.channels.resize(gc.generator.stages());
  for (int s = 0; s < gc.generator.stages(); ++s) gc.generator.channels[s] = std::max(16, 128 >> s);
  gc.lambda = a.lambda;
  gc.steps = a.steps;
  gc.batch_size = a.batch;
  gc.lr = a.lr;
  gc.seed = c.seed;
  PngSource png(ds.dir);
  const ImageSet real = load_image_set(select(ds.manifest, ds.splits, SplitPart::train), png, gc.resolution);
  const std::uint64_t before = m.checksum();
  auto result = gan::train_acgan(gc, real.images, m, [](const gan::GanCurvePoint& p) {
    log("step " + std::to_string(p.step) + " d " + fmt("%.4f", p.d_loss) + " g_adv " + fmt("%.4f", p.g_adv) +
        " g_age " + fmt("%.5f", p.g_age) + " d_acc " + fmt("%.3f", p.d_accuracy) + " age_mae " +
        fmt("%.2f", p.batch_age_mae));
  });
  if (m.checksum() != before) throw Error("internal error: the frozen predictor changed during GAN training");
  const fs::path out(a.out);
  json cfg = gc.to_json();
  cfg["predictor"] = fs::path(a.predictor).filename().string();
  result.generator.to_checkpoint(cfg).save(out / "generator.ckpt");
  result.discriminator.to_checkpoint().save(out / "discriminator.ckpt");
  write_file_atomic(out / "curves.csv", gan::curves_to_csv(result.curves));
  log("wrote " + a.out);
  return 0;
}

// ---- reage

struct Reage {
  std::string generator;
  std::string ages = "15,35,55,75,95";
  std::string out;
};

// Sweep row followed by the difference map (last minus first age), mapped
// to gray = 0.5 + 0.5 * d / max|d|.
int run_reage(const Reage& a, const Common& c) {
  const gan::Generator g = gan::Generator::from_checkpoint(Checkpoint::load(a.generator));
  const auto ages = parse_list(a.ages);
  const auto w = gan::LatentIdentity::from_seed(c.seed);
  const auto row = gan::reage_sweep(g, w, ages);
  const auto diff = gan::difference_map(row.front(), row.back());
  double peak = 0;
  for (float v : diff.pixels) peak = std::max(peak, static_cast<double>(std::abs(v)));
  const int r = g.resolution();
  const int cols = static_cast<int>(row.size()) + 1;
  png::Gray8 grid{r * cols, r, std::vector<unsigned char>(static_cast<std::size_t>(r) * r * cols)};
  for (int k = 0; k < cols; ++k) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        float v = 0;
        if (k + 1 < cols) {
          v = row[k].at(y, x);
        } else {
          const float d = diff.pixels[static_cast<std::size_t>(y) * r + x];
          v = peak > 0 ? static_cast<float>(0.5 + 0.5 * d / peak) : 0.5f;
        }
        grid.pixels[static_cast<std::size_t>(y) * grid.width + k * r + x] = png::quantize(v);
      }
    }
  }
  write_file_atomic(a.out, png::encode(grid));
  log("wrote " + a.out);
  return 0;
}

// ---- study

struct StudyArgs {
  std::string data;
  std::string state;
  int port = 8080;
  std::string host = "127.0.0.1";
  int pairs_per_bucket = 40;
  double bucket_width = 2.0;
  int buckets = 5;
  std::string study_id;
  std::string out;
};

fs::path state_dir(const StudyArgs& a) { return a.state.empty() ? fs::path(a.data) / "studies" : fs::path(a.state); }

study::StudyServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const StudyArgs& a) {
  const Dataset ds = load_dataset(a.data);
  study::StudyStore store(state_dir(a));
  std::unordered_map<std::string, std::string> paths;
  for (const auto& r : ds.manifest) paths[r.image_id] = r.file_path;
  const fs::path root = ds.dir;
  study::StudyServer server(store, ds.manifest,
                            [paths, root](const std::string& id) {
                              auto it = paths.find(id);
                              if (it == paths.end()) throw NotFoundError("no file for image " + id);
                              return read_file(root / it->second);
                            },
                            study::admin_token_from_env());
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (study::admin_token_from_env().empty()) log("warning: AGEX_ADMIN_TOKEN unset; admin endpoints disabled");
  log("serving " + std::to_string(store.study_ids().size()) + " studies on " + a.host + ":" + std::to_string(a.port));
  const bool ok = server.listen(a.host, a.port);
  g_server = nullptr;
  if (!ok) throw IoError("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

int run_make_study(const StudyArgs& a, const Common& c) {
  const Dataset ds = load_dataset(a.data);
  study::StudyOptions o;
  o.pairs_per_bucket = a.pairs_per_bucket;
  o.bucket_width_years = a.bucket_width;
  o.n_buckets = a.buckets;
  o.seed = c.seed;
  o.study_id = a.study_id;
  study::StudyStore store(state_dir(a));
  const auto def = store.create_study(study::create_study(ds.manifest, o));
  if (!a.out.empty()) write_file_atomic(a.out, study::truths_to_csv(def));
  std::cout << json{{"study_id", def.study_id}, {"n_pairs", def.pairs.size()}}.dump() << std::endl;
  return 0;
}

struct Participant {
  StudyArgs study;
  std::string checkpoint;
  std::string mode = "rank_model";
};

int run_model_participant(const Participant& a, const Common& c) {
  const Dataset ds = load_dataset(a.study.data);
  study::StudyStore store(state_dir(a.study));
  const auto def = store.study(a.study.study_id);
  const Checkpoint ck = Checkpoint::load(a.checkpoint);
  const auto mode = study::parse_participant_mode(a.mode);
  PngSource png(ds.dir);
  std::vector<study::ResponseRow> rows;
  if (mode == study::ParticipantMode::rank_model) {
    const RankModel m = RankModel::from_checkpoint(ck);
    check_data_resolution(ds, m.resolution());
    rows = study::rank_model_participant(def, ds.manifest, png, m, c.seed);
  } else {
    const AgeModel m = AgeModel::from_checkpoint(ck);
    check_data_resolution(ds, m.resolution());
    rows = study::estimate_participant(def, ds.manifest, png, m, c.seed);
  }
  write_file_atomic(a.study.out, study::responses_to_csv(rows));
  log("wrote " + std::to_string(rows.size()) + " responses to " + a.study.out);
  return 0;
}

// ---- analyze

struct Analyze {
  std::string responses;
  std::string truths;
  double sigma = 0;
  int mc_runs = 2000;
  std::string out;
};

int run_analyze(const Analyze& a, const Common& c) {
  const auto rows = study::responses_from_csv(read_file(a.responses));
  const auto truths = study::truths_from_csv(read_file(a.truths));
  stats::SummaryOptions o;
  if (a.sigma > 0) o.sigma_years = a.sigma;
  o.mc_runs = a.mc_runs;
  o.seed = c.seed;
  const auto s = stats::study_summary(rows, truths, o);
  fs::path out(a.out);
  write_file_atomic(out, stats::to_json(s).dump(2) + "\n");
  fs::path curve = out;
  curve.replace_extension(".buckets.csv");
  write_file_atomic(curve, stats::buckets_to_csv(s));
  log("all-pairs success " + fmt("%.3f", s.success_all) + "; wrote " + a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agex: chest radiograph age estimation toolkit (phantom data, models, GAN, reader study)"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random choice (default 0)");
  app.add_flag("--quiet", g_quiet, "Suppress progress logging on stderr");

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Render a phantom dataset (manifest, splits, PNGs)");
  gen_cmd->add_option("--n-patients", gen.n_patients, "Number of patients")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--multi-scan-fraction", gen.multi, "Share of patients with 2-5 scans")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--resolution", gen.resolution, "Image side in pixels (32, 64, 128 or 256)");
  gen_cmd->add_option("--abnormality-scale", gen.abnormality, "Age-growing cardiac jitter (0 disables)");
  gen_cmd->add_option("--noise-sd", gen.noise, "Additive noise sd");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  auto add_train_opts = [](CLI::App* cmd, Train& t, bool with_head) {
    cmd->add_option("--data", t.data, "Dataset directory from gen-data")->required();
    cmd->add_option("--out", t.out, "Output directory")->required();
    cmd->add_option("--config", t.config, "Train config JSON (flags override it)");
    if (with_head) cmd->add_option("--head", t.head, "regression | expectation | ordinal");
    cmd->add_option("--resolution", t.resolution, "Model input resolution");
    cmd->add_option("--epochs", t.epochs, "Maximum epochs");
    cmd->add_option("--batch-size", t.batch, "Batch size");
    cmd->add_option("--lr", t.lr, "Initial learning rate");
    cmd->add_option("--train-cap", t.cap, "Use at most this many training images");
  };

  Train train;
  train.head.clear();
  auto* train_cmd = app.add_subcommand("train", "Train an age model");
  add_train_opts(train_cmd, train, true);

  TrainRank rank;
  auto* rank_cmd = app.add_subcommand("train-rank", "Train a pairwise ranking model");
  add_train_opts(rank_cmd, rank.base, false);
  rank_cmd->add_option("--pairs", rank.pairs, "Training pairs")->check(CLI::PositiveNumber);
  rank_cmd->add_option("--val-pairs", rank.val_pairs, "Validation and test pairs")->check(CLI::PositiveNumber);
  rank_cmd->add_option("--same-patient-fraction", rank.same_patient, "Share of same-patient pairs")
      ->check(CLI::Range(0.0, 1.0));

  Sweep sweep;
  sweep.base.head.clear();
  auto* sweep_cmd = app.add_subcommand("sweep", "Test MAE against training-set size, with a log fit");
  add_train_opts(sweep_cmd, sweep.base, true);
  sweep_cmd->add_option("--sizes", sweep.sizes, "Ascending training-set sizes, comma separated");

  TrainGan tg;
  auto* gan_cmd = app.add_subcommand("train-gan", "Train the age-conditional GAN against a frozen predictor");
  gan_cmd->add_option("--predictor", tg.predictor, "Age model checkpoint (frozen)")->required();
  gan_cmd->add_option("--data", tg.data, "Dataset directory")->required();
  gan_cmd->add_option("--out", tg.out, "Output directory")->required();
  gan_cmd->add_option("--lambda", tg.lambda, "Age-term weight on ages scaled to [0,1]")->check(CLI::NonNegativeNumber);
  gan_cmd->add_option("--steps", tg.steps, "Training steps")->check(CLI::NonNegativeNumber);
  gan_cmd->add_option("--batch-size", tg.batch, "Batch size")->check(CLI::PositiveNumber);
  gan_cmd->add_option("--lr", tg.lr, "Adam learning rate")->check(CLI::PositiveNumber);

  Reage reage;
  auto* reage_cmd = app.add_subcommand("reage", "Render a re-aging sweep and its difference map");
  reage_cmd->add_option("--generator", reage.generator, "Generator checkpoint")->required();
  reage_cmd->add_option("--ages", reage.ages, "Ascending ages, comma separated");
  reage_cmd->add_option("--out", reage.out, "Output PNG")->required();

  StudyArgs serve;
  auto* serve_cmd = app.add_subcommand("serve-study", "Serve the reader-study HTTP API");
  serve_cmd->add_option("--data", serve.data, "Dataset directory")->required();
  serve_cmd->add_option("--state", serve.state, "Study state directory (default DATA/studies)");
  serve_cmd->add_option("--port", serve.port, "TCP port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--host", serve.host, "Bind address");

  StudyArgs make;
  auto* make_cmd = app.add_subcommand("make-study", "Schedule a study offline and persist it");
  make_cmd->add_option("--data", make.data, "Dataset directory")->required();
  make_cmd->add_option("--state", make.state, "Study state directory (default DATA/studies)");
  make_cmd->add_option("--pairs-per-bucket", make.pairs_per_bucket, "Pairs per separation bucket");
  make_cmd->add_option("--bucket-width", make.bucket_width, "Bucket width in years");
  make_cmd->add_option("--buckets", make.buckets, "Number of buckets");
  make_cmd->add_option("--study-id", make.study_id, "Explicit study id");
  make_cmd->add_option("--truths-out", make.out, "Also write the truths CSV here");

  Participant part;
  auto* part_cmd = app.add_subcommand("model-participant", "Answer every pair of a study with a model");
  part_cmd->add_option("--data", part.study.data, "Dataset directory")->required();
  part_cmd->add_option("--state", part.study.state, "Study state directory (default DATA/studies)");
  part_cmd->add_option("--study", part.study.study_id, "Study id")->required();
  part_cmd->add_option("--checkpoint", part.checkpoint, "Model checkpoint")->required();
  part_cmd->add_option("--mode", part.mode, "rank_model | estimate_based");
  part_cmd->add_option("--out", part.study.out, "Responses CSV")->required();

  Analyze an;
  auto* an_cmd = app.add_subcommand("analyze", "Summarize study responses against the truths");
  an_cmd->add_option("--responses", an.responses, "Responses CSV")->required();
  an_cmd->add_option("--truths", an.truths, "Truths CSV")->required();
  an_cmd->add_option("--sigma", an.sigma, "Error sd for the expected-success model (years)");
  an_cmd->add_option("--mc-runs", an.mc_runs, "Monte Carlo resamples")->check(CLI::Range(2, 10000000));
  an_cmd->add_option("--out", an.out, "Report JSON (bucket CSV written alongside)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const bool seed_given = app.count("--seed") > 0;
  try {
    if (*gen_cmd) return run_gen_data(gen, common);
    if (*train_cmd) return run_train(train, common, seed_given);
    if (*rank_cmd) return run_train_rank(rank, common, seed_given);
    if (*sweep_cmd) return run_sweep(sweep, common, seed_given);
    if (*gan_cmd) return run_train_gan(tg, common);
    if (*reage_cmd) return run_reage(reage, common);
    if (*serve_cmd) return run_serve(serve);
    if (*make_cmd) return run_make_study(make, common);
    if (*part_cmd) return run_model_participant(part, common);
    if (*an_cmd) return run_analyze(an, common);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "agex: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "agex: error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
