#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fibrelens/error.hpp"
#include "fibrelens/fibresim.hpp"
#include "fibrelens/inversion.hpp"
#include "fibrelens/metrics.hpp"

namespace fibrelens::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kFormat = 4, kNumeric = 5 };

class UsageError : public Error {
 public:
  using Error::Error;
};

// Raised by parse_args for --help; carries the usage text.
class HelpRequested : public Error {
 public:
  using Error::Error;
};

// Everything a command needs, fully resolved from flags, config file,
// environment and defaults.
struct RunManifest {
  std::string command;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  // Every resolved option of the command as (flag name, value), in declaration order.
  std::vector<std::pair<std::string, std::string>> values;

  FibreConfig fibre;
  TrainConfig train;
  MetricParams metrics;

  std::filesystem::path pairs;
  std::filesystem::path fibre_path;
  std::filesystem::path images;
  std::filesystem::path checkpoint;
  std::filesystem::path frames;
  std::vector<std::filesystem::path> rgb;
  std::size_t side = 28;
  std::size_t count = 1000;
  std::size_t image_side = 0;
  std::size_t crop_dim = 0;
  std::size_t frame_side = 120;
  std::size_t drift_steps = 10;
  bool rgb_mode = false;
  bool resume = false;
  bool write_png = true;
};

RunManifest parse_args(const std::vector<std::string>& args);

// Writes `manifest.txt` in --config syntax under the output directory.
void write_run_manifest(const RunManifest& manifest);

// Executes a parsed command; throws the toolkit's error types on failure.
void run(const RunManifest& manifest, std::ostream& log);

// parse_args + run with exceptions mapped onto exit codes.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fibrelens::cli
