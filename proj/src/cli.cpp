#include "fibrelens/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "fibrelens/checkpoint.hpp"
#include "fibrelens/dataset.hpp"
#include "fibrelens/pipeline.hpp"
#include "fibrelens/random.hpp"
#include "fibrelens/schedule.hpp"
#include "fibrelens/spkl.hpp"

namespace fibrelens::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFile = "manifest.txt";

// Reads flat `key = value` files and attaches every key to the active subcommand.
class FlatConfig : public CLI::ConfigINI {
 public:
  explicit FlatConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    const auto subs = app_->get_subcommands();
    if (subs.empty()) return items;
    const std::string active = subs.front()->get_name();
    for (auto& item : items) {
      if (item.parents.empty()) item.parents = {active};
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

struct Commands {
  CLI::App* simulate = nullptr;
  CLI::App* gen_random = nullptr;
  CLI::App* transmit = nullptr;
  CLI::App* train = nullptr;
  CLI::App* reconstruct = nullptr;
  CLI::App* evaluate = nullptr;
  CLI::App* decorrelate = nullptr;
};

void add_out(CLI::App* cmd, RunManifest& m) {
  cmd->add_option("--out", m.out_dir, "Output directory")->required();
}

void add_seed(CLI::App* cmd, RunManifest& m) {
  cmd->add_option("--rng-seed,--seed", m.seed, "Random seed")->envname("FIBRELENS_SEED");
}

void add_fibre_options(CLI::App* cmd, RunManifest& m) {
  cmd->add_option("--input-pixels", m.fibre.input_pixels, "Image pixels (side squared)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output-pixels", m.fibre.output_pixels, "Speckle pixels (side squared)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--mode-count", m.fibre.mode_count, "Effective number of guided modes")
      ->check(CLI::PositiveNumber);
}

void add_camera_options(CLI::App* cmd, RunManifest& m) {
  cmd->add_option("--noise-floor", m.fibre.noise_floor, "Noise std relative to the frame maximum")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--quant-levels", m.fibre.quant_levels, "Camera quantisation levels")
      ->check(CLI::Range(2u, 1u << 24));
}

void add_metric_options(CLI::App* cmd, RunManifest& m) {
  cmd->add_option("--k1", m.metrics.k1, "SSIM K1")->check(CLI::PositiveNumber);
  cmd->add_option("--k2", m.metrics.k2, "SSIM K2")->check(CLI::PositiveNumber);
  cmd->add_option("--dynamic-range", m.metrics.dynamic_range, "SSIM dynamic range L")
      ->check(CLI::PositiveNumber);
  const std::map<std::string, SsimForm> forms{{"standard", SsimForm::standard},
                                              {"literal", SsimForm::literal}};
  cmd->add_option("--ssim-form", m.metrics.form, "SSIM denominator form")
      ->transform(CLI::CheckedTransformer(forms, CLI::ignore_case));
}

void add_train_options(CLI::App* cmd, RunManifest& m, double& min_lr) {
  TrainConfig& t = m.train;
  cmd->add_option("--lambda", t.lambda, "L2 weight")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr", t.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", t.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--max-epochs,--epochs", t.max_epochs, "Maximum epochs")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--init-bound", t.init_bound, "Uniform init bound")->check(CLI::PositiveNumber);
  cmd->add_option("--plateau-factor", t.plateau_factor, "LR reduction factor")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--plateau-patience", t.plateau_patience, "Epochs before LR reduction")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--plateau-threshold", t.plateau_threshold, "Improvement threshold")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--min-lr", min_lr, "Learning-rate floor (0: lr/1e3)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--stop-min-delta", t.stop_min_delta, "Early-stop improvement threshold")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--stop-patience", t.stop_patience, "Early-stop patience")->check(CLI::PositiveNumber);
  const std::map<std::string, LossDomain> domains{{"amplitude", LossDomain::amplitude},
                                                  {"intensity", LossDomain::intensity}};
  cmd->add_option("--loss-domain", t.loss_domain, "Compare amplitudes or intensities")
      ->transform(CLI::CheckedTransformer(domains, CLI::ignore_case));
  cmd->add_option("--threads", t.threads, "Worker threads (1: strict deterministic)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--keep-checkpoints", t.keep_checkpoints, "Checkpoints retained (0: all)");
}

std::string join_results(const CLI::Option* opt) {
  const auto& results = opt->results();
  if (results.empty()) return opt->get_default_str();
  if (results.size() == 1) return results.front();
  std::string joined = "[";
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i) joined += ",";
    joined += "\"" + results[i] + "\"";
  }
  return joined + "]";
}

void record_values(const CLI::App* cmd, RunManifest& m) {
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    m.values.emplace_back(name, join_results(opt));
  }
}

void require_square(std::size_t pixels, const char* what) {
  try {
    square_side(pixels);
  } catch (const ArgumentError&) {
    throw UsageError(std::string(what) + " must be a perfect square, got " + std::to_string(pixels));
  }
}

}  // namespace

RunManifest parse_args(const std::vector<std::string>& args) {
  RunManifest m;
  m.fibre.noise_floor = 0.01;
  m.train.threads = std::max(1u, std::thread::hardware_concurrency());
  double min_lr = 0.0;

  CLI::App app{"Multimode-fibre imaging toolkit: simulate, train and evaluate complex inverse models",
               "fibrelens"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Read flag values from a key = value file");
  app.config_formatter(std::make_shared<FlatConfig>(&app));
  app.set_version_flag("--version", kVersion);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);

  Commands c;
  c.simulate = app.add_subcommand("simulate", "Generate a simulated fibre transmission matrix");
  add_fibre_options(c.simulate, m);
  add_camera_options(c.simulate, m);
  add_seed(c.simulate, m);
  add_out(c.simulate, m);

  c.gen_random = app.add_subcommand("gen-random", "Generate random 100-level grayscale patterns");
  c.gen_random->add_option("--side", m.side, "Pattern side length")->check(CLI::PositiveNumber);
  c.gen_random->add_option("--count", m.count, "Number of patterns")->check(CLI::PositiveNumber);
  c.gen_random->add_flag("--png,!--no-png", m.write_png, "Also write PNG files and an image manifest")
      ->default_str("true");
  add_seed(c.gen_random, m);
  add_out(c.gen_random, m);

  c.transmit = app.add_subcommand("transmit", "Send images through a simulated fibre into an SPKL pair set");
  c.transmit->add_option("--fibre", m.fibre_path, "Transmission matrix (.mmfw)")->required()->check(CLI::ExistingFile);
  c.transmit->add_option("--images", m.images, "Image manifest (.txt) or image-only SPKL")->required()->check(CLI::ExistingFile);
  c.transmit->add_option("--image-side", m.image_side, "Resize side for PNG input (0: from fibre)");
  c.transmit->add_option("--crop-dim", m.crop_dim, "Speckle side after cropping (0: full frame)");
  c.transmit->add_flag("--rgb", m.rgb_mode, "Transmit R, G and B channels separately")->default_str("false");
  add_camera_options(c.transmit, m);
  add_seed(c.transmit, m);
  add_out(c.transmit, m);

  c.train = app.add_subcommand("train", "Fit the complex inverse matrix to a pair set");
  c.train->add_option("--pairs", m.pairs, "Training pairs (.spkl)")->required()->check(CLI::ExistingFile);
  add_train_options(c.train, m, min_lr);
  c.train->add_flag("--resume", m.resume, "Continue from the latest checkpoint in the output directory")
      ->default_str("false");
  add_seed(c.train, m);
  add_out(c.train, m);

  c.reconstruct = app.add_subcommand("reconstruct", "Reconstruct images from speckle records");
  c.reconstruct->add_option("--checkpoint", m.checkpoint, "Model weights (.mmfw)")->required()->check(CLI::ExistingFile);
  auto* pairs_opt = c.reconstruct->add_option("--pairs", m.pairs, "Speckle records (.spkl)")->check(CLI::ExistingFile);
  auto* rgb_opt = c.reconstruct->add_option("--rgb", m.rgb, "Red, green and blue speckle sets (.spkl)")
                      ->expected(3)
                      ->check(CLI::ExistingFile);
  pairs_opt->excludes(rgb_opt);
  add_out(c.reconstruct, m);

  c.evaluate = app.add_subcommand("evaluate", "Score reconstructions with SSIM, PCC and MSE");
  c.evaluate->add_option("--checkpoint", m.checkpoint, "Model weights (.mmfw)")->required()->check(CLI::ExistingFile);
  c.evaluate->add_option("--pairs", m.pairs, "Evaluation pairs (.spkl)")->required()->check(CLI::ExistingFile);
  add_metric_options(c.evaluate, m);
  add_out(c.evaluate, m);

  c.decorrelate = app.add_subcommand("decorrelate", "SSIM of speckle frames against the first frame");
  c.decorrelate->add_option("--frames", m.frames, "Manifest of speckle PNG frames")->check(CLI::ExistingFile);
  c.decorrelate->add_option("--frame-side", m.frame_side, "Frame side after resampling")->check(CLI::PositiveNumber);
  c.decorrelate->add_option("--drift-steps", m.drift_steps, "Simulated drift steps when no frames are given")
      ->check(CLI::Range(2, 100000));
  add_fibre_options(c.decorrelate, m);
  add_metric_options(c.decorrelate, m);
  add_seed(c.decorrelate, m);
  add_out(c.decorrelate, m);

  for (CLI::App* sub : {c.simulate, c.gen_random, c.transmit, c.train, c.reconstruct, c.evaluate, c.decorrelate}) {
    sub->fallthrough();
  }

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    throw HelpRequested(subs.empty() ? app.help() : subs.front()->help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::CallForVersion&) {
    throw HelpRequested(std::string(kVersion) + "\n");
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  const CLI::App* cmd = app.get_subcommands().front();
  m.command = cmd->get_name();
  if (cmd == c.reconstruct && m.pairs.empty() && m.rgb.empty()) {
    throw UsageError("reconstruct needs --pairs or --rgb");
  }
  if (min_lr > 0.0) m.train.min_lr = min_lr;
  m.fibre.rng_seed = m.seed;
  m.train.rng_seed = m.seed;
  if (cmd == c.simulate || cmd == c.decorrelate) {
    require_square(m.fibre.input_pixels, "--input-pixels");
    require_square(m.fibre.output_pixels, "--output-pixels");
  }
  try {
    if (cmd == c.train) m.train.validate();
    m.fibre.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  record_values(cmd, m);
  return m;
}

void write_run_manifest(const RunManifest& manifest) {
  fs::create_directories(manifest.out_dir);
  std::ostringstream out;
  out << "# fibrelens " << manifest.version << " run manifest\n";
  out << "# command = " << manifest.command << "\n";
  out << "# rerun with: fibrelens " << manifest.command << " --config " << kManifestFile << "\n";
  for (const auto& [key, value] : manifest.values) {
    if (key == "config") continue;
    out << key << " = " << value << "\n";
  }
  const fs::path path = manifest.out_dir / kManifestFile;
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << out.str();
  if (!file) throw IoError("failed writing " + path.string());
}

namespace {

InverseModel load_fibre(const fs::path& path) { return load_checkpoint(path).model; }

std::vector<ImagePlane> load_images(const RunManifest& m, std::size_t side) {
  if (m.images.extension() == ".spkl") {
    const PairSet set = read_spkl(m.images);
    std::vector<ImagePlane> images;
    images.reserve(set.size());
    for (const auto& pair : set.records()) images.push_back(pair.image);
    return images;
  }
  std::vector<ImagePlane> images;
  for (const auto& path : read_manifest(m.images)) images.push_back(load_grayscale(path, side));
  return images;
}

void check_model_dims(const InverseModel& model, std::size_t speckle_length, std::size_t image_length) {
  if (model.input_size() != speckle_length) {
    throw FormatError(FormatError::Kind::dimension_mismatch,
                      "dimension mismatch: checkpoint expects " + std::to_string(model.input_size()) +
                          " speckle amplitudes (" + std::to_string(model.in_dim()) + "x" +
                          std::to_string(model.in_dim()) + "), data has " + std::to_string(speckle_length));
  }
  if (image_length != 0 && model.output_size() != image_length) {
    throw FormatError(FormatError::Kind::dimension_mismatch,
                      "dimension mismatch: checkpoint produces " + std::to_string(model.output_size()) +
                          " pixels, data images have " + std::to_string(image_length));
  }
}

void run_simulate(const RunManifest& m, std::ostream& log) {
  const ComplexMatrix t = generate_fibre(m.fibre);
  const InverseModel packed(square_side(m.fibre.output_pixels), square_side(m.fibre.input_pixels), t);
  save_checkpoint(m.out_dir / "fibre.mmfw", packed, CheckpointMeta{0, 0.0f, 0.0f, m.seed});
  log << "fibre " << t.rows() << "x" << t.cols() << " (" << m.fibre.mode_count << " modes) -> "
      << (m.out_dir / "fibre.mmfw").string() << "\n";
}

void run_gen_random(const RunManifest& m, std::ostream& log) {
  PairSet set;
  set.reserve(m.count);
  std::vector<fs::path> entries;
  const fs::path image_dir = m.out_dir / "images";
  if (m.write_png) fs::create_directories(image_dir);
  for (std::size_t i = 0; i < m.count; ++i) {
    ImagePlane pattern = random_pattern(m.side, derive_seed(m.seed, i));
    if (m.write_png) {
      char name[32];
      std::snprintf(name, sizeof name, "pattern_%06zu.png", i);
      write_png(image_dir / name, pattern);
      entries.push_back(fs::path("images") / name);
    }
    set.add(SpeckleRecord{}, std::move(pattern));
  }
  write_spkl(m.out_dir / "images.spkl", set);
  if (m.write_png) write_manifest(m.out_dir / "images.txt", entries);
  log << m.count << " patterns " << m.side << "x" << m.side << " -> " << m.out_dir.string() << "\n";
}

void run_transmit(const RunManifest& m, std::ostream& log) {
  const InverseModel fibre = load_fibre(m.fibre_path);
  const ComplexMatrix& t = fibre.weights();
  FibreConfig cfg = m.fibre;
  cfg.input_pixels = t.cols();
  cfg.output_pixels = t.rows();
  const std::size_t side = m.image_side ? m.image_side : fibre.in_dim();

  if (m.rgb_mode) {
    if (m.images.extension() == ".spkl") throw UsageError("--rgb needs a PNG manifest");
    std::array<std::vector<ImagePlane>, 3> channels;
    for (const auto& path : read_manifest(m.images)) {
      const auto planes = split_rgb(load_rgb(path, side));
      for (std::size_t c = 0; c < 3; ++c) channels[c].push_back(planes[c]);
    }
    const char* names[] = {"pairs_r.spkl", "pairs_g.spkl", "pairs_b.spkl"};
    for (std::size_t c = 0; c < 3; ++c) {
      write_spkl(m.out_dir / names[c], batch_transmit(t, channels[c], cfg, m.crop_dim));
    }
    log << channels[0].size() << " RGB images transmitted\n";
    return;
  }

  const auto images = load_images(m, side);
  if (!images.empty() && images.front().size() != t.cols()) {
    throw FormatError(FormatError::Kind::dimension_mismatch,
                      "dimension mismatch: fibre expects " + std::to_string(t.cols()) +
                          " image pixels, images have " + std::to_string(images.front().size()));
  }
  const PairSet pairs = batch_transmit(t, images, cfg, m.crop_dim);
  write_spkl(m.out_dir / "pairs.spkl", pairs);
  log << pairs.size() << " pairs -> " << (m.out_dir / "pairs.spkl").string() << "\n";
}

void run_train(const RunManifest& m, std::ostream& log) {
  const PairSet pairs = read_spkl(m.pairs);
  TrainOptions options;
  options.checkpoint_dir = m.out_dir / "checkpoints";
  ResumeState resume;
  if (m.resume) {
    resume = load_resume_state(options.checkpoint_dir);
    options.resume = &resume;
    log << "resuming at epoch " << resume.meta.epoch << "\n";
  }
  options.on_epoch = [&](const LossReport& r) {
    log << "epoch " << r.epoch << " loss " << r.train_loss << " val_mse " << r.val_mse << " lr " << r.lr
        << "\n";
  };
  const TrainResult result = train(pairs, m.train, options);
  const std::size_t epoch = result.history.empty() ? 0 : result.history.back().epoch;
  std::vector<double> losses;
  for (const auto& h : result.history) losses.push_back(h.train_loss);
  const double lr = plateau_update(losses, m.train);
  save_checkpoint(m.out_dir / "model.mmfw", result.model,
                  CheckpointMeta{static_cast<std::uint32_t>(epoch), static_cast<float>(m.train.lambda),
                                 static_cast<float>(lr), m.seed});
  log << "trained " << epoch << " epochs" << (result.stopped_early ? " (early stop)" : "") << " -> "
      << (m.out_dir / "model.mmfw").string() << "\n";
}

void run_reconstruct(const RunManifest& m, std::ostream& log) {
  const InverseModel model = load_checkpoint(m.checkpoint).model;
  fs::create_directories(m.out_dir);
  char name[32];
  if (!m.rgb.empty()) {
    std::array<PairSet, 3> sets{read_spkl(m.rgb[0]), read_spkl(m.rgb[1]), read_spkl(m.rgb[2])};
    for (const auto& s : sets) {
      check_model_dims(model, s.speckle_length(), 0);
      if (s.size() != sets[0].size()) throw ArgumentError("RGB speckle sets differ in record count");
    }
    for (std::size_t i = 0; i < sets[0].size(); ++i) {
      const RgbImage image =
          reconstruct_rgb(model, sets[0][i].speckle, sets[1][i].speckle, sets[2][i].speckle);
      std::snprintf(name, sizeof name, "recon_%06zu.png", i);
      write_png(m.out_dir / name, image);
    }
    log << sets[0].size() << " RGB reconstructions -> " << m.out_dir.string() << "\n";
    return;
  }
  const PairSet pairs = read_spkl(m.pairs);
  check_model_dims(model, pairs.speckle_length(), 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::snprintf(name, sizeof name, "recon_%06zu.png", i);
    write_png(m.out_dir / name, reconstruct(model, pairs[i].speckle));
  }
  log << pairs.size() << " reconstructions -> " << m.out_dir.string() << "\n";
}

void run_evaluate(const RunManifest& m, std::ostream& log) {
  const InverseModel model = load_checkpoint(m.checkpoint).model;
  const PairSet pairs = read_spkl(m.pairs);
  check_model_dims(model, pairs.speckle_length(), pairs.image_length());
  const EvalReport report = evaluate(model, pairs, m.metrics);
  write_eval_csv(m.out_dir / "report.csv", report);
  log << "mean ssim " << report.mean_ssim << " pcc " << report.mean_pcc << " mse " << report.mean_mse
      << " (" << report.undefined_pcc << " undefined pcc)\n";
}

void run_decorrelate(const RunManifest& m, std::ostream& log) {
  std::vector<ImagePlane> frames;
  if (!m.frames.empty()) {
    for (const auto& path : read_manifest(m.frames)) frames.push_back(load_grayscale(path, m.frame_side));
  } else {
    const ImagePlane probe = random_pattern(square_side(m.fibre.input_pixels), derive_seed(m.seed, 2));
    frames = drift_frames(m.fibre, m.drift_steps, probe);
  }
  const auto series = decorrelation_series(frames, m.metrics);
  std::ostringstream out;
  out << "index,ssim\n";
  char buf[64];
  for (const auto& p : series) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", p.index, p.ssim);
    out << buf;
  }
  const fs::path path = m.out_dir / "decorrelation.csv";
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << out.str();
  log << series.size() << " frames -> " << path.string() << "\n";
}

}  // namespace

void run(const RunManifest& m, std::ostream& log) {
  write_run_manifest(m);
  if (m.command == "simulate") return run_simulate(m, log);
  if (m.command == "gen-random") return run_gen_random(m, log);
  if (m.command == "transmit") return run_transmit(m, log);
  if (m.command == "train") return run_train(m, log);
  if (m.command == "reconstruct") return run_reconstruct(m, log);
  if (m.command == "evaluate") return run_evaluate(m, log);
  if (m.command == "decorrelate") return run_decorrelate(m, log);
  throw UsageError("unknown command " + m.command);
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const RunManifest manifest = parse_args(args);
    run(manifest, err);
    return kOk;
  } catch (const HelpRequested& h) {
    out << h.what();
    return kOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "format error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kFormat;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const UndefinedMetricError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  }
}

}  // namespace fibrelens::cli
