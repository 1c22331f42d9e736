// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fibrelens/checkpoint.hpp"
#include "fibrelens/cli.hpp"
#include "fibrelens/fibresim.hpp"
#include "fibrelens/metrics.hpp"
#include "fibrelens/pipeline.hpp"
#include "fibrelens/spkl.hpp"
#include "oracle.hpp"

using namespace fibrelens;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---- 1. gradient fidelity ---------------------------------------------------

Outcome gradient_fidelity() {
  constexpr double kStep = 1e-4;
  constexpr double kTolerance = 1e-3;
  constexpr double kModulusFloor = 1e-6;  // |Wx| is not differentiable at zero
  Rng rng(20240601);
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t max_rows = 0;
  std::size_t max_cols = 0;
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t out_dim = 1 + rng.below(3);
    const std::size_t in_dim = 1 + rng.below(3);
    const std::size_t batch_size = 1 + rng.below(4);
    const double lambda = instance % 2 == 0 ? 0.0 : 0.03;
    const std::size_t rows = out_dim * out_dim;
    const std::size_t cols = in_dim * in_dim;
    max_rows = std::max(max_rows, rows);
    max_cols = std::max(max_cols, cols);

    ComplexMatrix w(rows, cols);
    for (auto& z : w.entries()) {
      z = cfloat(static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1)));
    }
    const InverseModel model(out_dim, in_dim, w);
    std::vector<std::vector<float>> xs(batch_size, std::vector<float>(cols));
    std::vector<std::vector<float>> ts(batch_size, std::vector<float>(rows));
    std::vector<Example> batch;
    for (std::size_t b = 0; b < batch_size; ++b) {
      for (auto& v : xs[b]) v = static_cast<float>(rng.uniform());
      for (auto& v : ts[b]) v = static_cast<float>(rng.uniform());
      batch.push_back({xs[b], ts[b]});
    }

    const Gradient g = gradient(model, batch, lambda);
    oracle::DenseModel dense = oracle::widen(model);
    const auto samples = oracle::widen(batch);
    std::vector<bool> near_zero(rows, false);
    for (const auto& x : xs) {
      const auto a = forward(model, x);
      for (std::size_t i = 0; i < rows; ++i) near_zero[i] = near_zero[i] || a[i] < kModulusFloor;
    }
    for (std::size_t k = 0; k < rows * cols; ++k) {
      if (near_zero[k / cols]) {
        skipped += 2;
        continue;
      }
      for (int part = 0; part < 2; ++part) {
        const oracle::cd original = dense.w[k];
        const oracle::cd delta = part == 0 ? oracle::cd(kStep, 0) : oracle::cd(0, kStep);
        dense.w[k] = original + delta;
        const double up = oracle::loss(dense, samples, lambda);
        dense.w[k] = original - delta;
        const double down = oracle::loss(dense, samples, lambda);
        dense.w[k] = original;
        const double numeric = (up - down) / (2 * kStep);
        const double analytic = part == 0 ? g.re[k] : g.im[k];
        const double scale = std::max(std::abs(numeric), std::abs(analytic));
        if (scale > 0.0) worst = std::max(worst, std::abs(numeric - analytic) / scale);
        ++checked;
      }
    }
  }
  return {worst < kTolerance,
          format("max relative error %.3g (limit %g) over %zu coordinates, %zu skipped, W up to %zux%zu",
                 worst, kTolerance, checked, skipped, max_rows, max_cols)};
}

// ---- 2. hidden-model recovery -----------------------------------------------

Outcome hidden_model_recovery() {
  constexpr double kTarget = 1e-4;
  const PairSet pairs = oracle::hidden_model_pairs(8, 10, 2000, 7001);

  TrainConfig cfg;
  cfg.max_epochs = 500;
  cfg.rng_seed = 11;
  cfg.lambda = 1e-6;
  cfg.lr = 200.0;
  const TrainResult small = train(pairs, cfg);
  const LossReport& last = small.history.back();

  // Same data with the paper's regulariser; the rate is lowered to keep
  // lr * 2 * lambda below the stability limit of the weight-decay term.
  TrainConfig paper = cfg;
  paper.lambda = 0.03;
  paper.lr = 30.0;
  const TrainResult heavy = train(pairs, paper);
  const LossReport& heavy_last = heavy.history.back();

  return {last.val_mse < kTarget,
          format("lambda=1e-6 lr=%g: val amplitude MSE %.3g after %zu epochs (limit %g); "
                 "lambda=0.03 lr=%g: val MSE %.3g after %zu epochs",
                 cfg.lr, last.val_mse, last.epoch, kTarget, paper.lr, heavy_last.val_mse, heavy_last.epoch)};
}

// ---- 3. synthetic end-to-end imaging ----------------------------------------

struct ImagingRun {
  double pcc = 0.0;
  double baseline = 0.0;
  std::size_t epochs = 0;
};

ImagingRun imaging_run(const PairSet& train_set, const PairSet& test_set, const TrainConfig& cfg) {
  const TrainResult result = train(train_set, cfg);
  const EvalReport report = evaluate(result.model, test_set);
  const ImagePlane mean = mean_image(train_set, 0, train_set.split().train);
  double baseline = 0.0;
  for (const auto& pair : test_set.records()) baseline += pcc(mean, pair.image);
  baseline /= static_cast<double>(test_set.size());
  return {report.mean_pcc, baseline, result.history.size()};
}

Outcome synthetic_imaging() {
  FibreConfig fibre;
  fibre.input_pixels = 28 * 28;
  fibre.output_pixels = 40 * 40;
  fibre.mode_count = 256;
  fibre.quant_levels = 100;
  fibre.noise_floor = 0.01;
  fibre.rng_seed = 7;
  const ComplexMatrix t = generate_fibre(fibre);

  std::vector<ImagePlane> patterns;
  for (std::size_t i = 0; i < 20000; ++i) patterns.push_back(random_pattern(28, derive_seed(11, i)));
  const PairSet large = batch_transmit(t, patterns, fibre);
  PairSet small;
  for (std::size_t i = 0; i < 2000; ++i) small.add(large[i].speckle, large[i].image);

  std::vector<ImagePlane> tests;
  for (std::size_t i = 0; i < 200; ++i) tests.push_back(oracle::blob_image(28, derive_seed(99, i)));
  FibreConfig camera = fibre;
  camera.rng_seed = derive_seed(fibre.rng_seed, 99);  // fresh camera noise, same fibre
  const PairSet test_set = batch_transmit(t, tests, camera);

  TrainConfig cfg;
  cfg.lambda = 1e-6;
  cfg.lr = 2.0;
  cfg.max_epochs = 60;
  cfg.rng_seed = 3;
  const ImagingRun few = imaging_run(small, test_set, cfg);
  const ImagingRun many = imaging_run(large, test_set, cfg);

  const bool pass = many.pcc > many.baseline && few.pcc > few.baseline && many.pcc >= few.pcc;
  return {pass, format("20000 pairs: PCC %.4f vs mean-image baseline %.4f (%zu epochs); "
                       "2000 pairs: PCC %.4f vs baseline %.4f (%zu epochs)",
                       many.pcc, many.baseline, many.epochs, few.pcc, few.baseline, few.epochs)};
}

// ---- 4. metric correctness --------------------------------------------------

Outcome metric_correctness() {
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  const MetricParams p;
  Rng rng(404);
  auto random_image = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    return v;
  };

  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_image(64);
    const auto y = random_image(64);
    check(ssim(x, x, p) == 1.0, "ssim(X,X) == 1");
    check(std::abs(ssim(x, y, p) - ssim(y, x, p)) <= 1e-12, "ssim symmetry");
    check(std::abs(pcc(x, y) - pcc(y, x)) <= 1e-12, "pcc symmetry");
    check(std::abs(ssim(x, y, p)) <= 1.0 && std::abs(pcc(x, y)) <= 1.0, "boundedness");
    const double a = rng.uniform(0.1, 3.0);
    const double b = rng.uniform(-1.0, 1.0);
    std::vector<float> pos(x.size()), neg(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      pos[i] = static_cast<float>(a * x[i] + b);
      neg[i] = static_cast<float>(-a * x[i] + b);
    }
    const double ref = oracle::pcc(oracle::to_double(pos), oracle::to_double(y));
    check(std::abs(pcc(pos, y) - ref) <= 1e-9, "pcc(aX+b,Y) matches oracle");
    check(std::abs(pcc(pos, y) - pcc(x, y)) <= 1e-5, "pcc positive affine invariance");
    check(std::abs(pcc(neg, y) + pcc(x, y)) <= 1e-5, "pcc negative affine invariance");
  }

  const std::vector<float> zeros(16, 0.0f), ones(16, 1.0f), sevens(16, 0.7f);
  check(ssim(sevens, sevens, p) == 1.0, "constant equal images");
  const double expected = oracle::ssim(oracle::to_double(zeros), oracle::to_double(ones), p.c1(), p.c2());
  check(std::abs(ssim(zeros, ones, p) - expected) <= 1e-9, "ssim(0,1) oracle");
  check(std::abs(ssim(zeros, ones, p) - 1e-4 / 1.0001) <= 1e-9, "ssim(0,1) = C1/(1+C1)");

  const std::vector<float> x123{1, 2, 3}, y321{3, 2, 1}, y124{1, 2, 4};
  std::vector<float> affine(x123.size());
  for (std::size_t i = 0; i < x123.size(); ++i) affine[i] = 2.0f * x123[i] + 0.1f;
  check(std::abs(pcc(x123, affine) - 1.0) <= 1e-9, "pcc(X, 2X+0.1) = 1");
  check(std::abs(pcc(x123, y321) + 1.0) <= 1e-9, "pcc([1,2,3],[3,2,1]) = -1");
  const double hand = oracle::pcc(oracle::to_double(x123), oracle::to_double(y124));
  check(std::abs(pcc(x123, y124) - hand) <= 1e-9, "pcc([1,2,3],[1,2,4]) oracle");
  check(std::abs(pcc(x123, y124) - 0.98198) <= 1e-5, "pcc([1,2,3],[1,2,4]) = 0.98198");

  const std::vector<float> a{0.0f, 0.5f}, b{0.5f, 0.5f};
  check(mse(a, b) == 0.125, "mse([0,.5],[.5,.5]) = 0.125");
  check(mse(zeros, ones) == 1.0, "mse(0,1) = 1");

  std::string detail = failures.empty() ? "all identity, symmetry, bound, affine and worked-example checks hold"
                                        : "failed: " + failures.front();
  return {failures.empty(), detail};
}

// ---- 5. decorrelation monotonicity ------------------------------------------

Outcome decorrelation_monotonicity() {
  FibreConfig fibre;
  fibre.input_pixels = 28 * 28;
  fibre.output_pixels = 120 * 120;
  fibre.mode_count = 256;
  fibre.noise_floor = 0.01;
  fibre.rng_seed = 5;
  const auto frames = drift_frames(fibre, 10, random_pattern(28, 55));
  const auto series = decorrelation_series(frames);
  bool monotone = series.front().ssim == 1.0;
  std::ostringstream curve;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (k > 0 && series[k].ssim > series[k - 1].ssim) monotone = false;
    curve << (k ? " " : "") << format("%.3f", series[k].ssim);
  }
  return {monotone && series.size() == 10, "SSIM vs frame 0: " + curve.str()};
}

// ---- 6. format round trips --------------------------------------------------

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fibrelens");
  std::ostringstream out, err;
  return cli::main_entry(args, out, err);
}

Outcome format_round_trips() {
  const fs::path dir = oracle::scratch_dir("acceptance_formats");
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  Rng rng(66);
  ComplexMatrix w(16, 25);
  for (auto& z : w.entries()) z = cfloat(static_cast<float>(rng.normal()), static_cast<float>(rng.normal()));
  w(0, 0) = cfloat(-0.0f, 1e-40f);  // signed zero and a subnormal must survive
  const InverseModel model(4, 5, w);
  const CheckpointMeta meta{12, 0.03f, 1e-5f, 99};
  save_checkpoint(dir / "model.mmfw", model, meta);
  const Checkpoint loaded = load_checkpoint(dir / "model.mmfw");
  check(oracle::file_bytes(dir / "model.mmfw") == encode_checkpoint(loaded.model, loaded.meta),
        "checkpoint re-encodes to identical bytes");
  check(std::memcmp(loaded.model.weights().entries().data(), w.entries().data(), w.size() * sizeof(cfloat)) == 0,
        "checkpoint weights bit-exact");
  check(loaded.meta == meta, "checkpoint metadata");

  PairSet pairs;
  for (int i = 0; i < 5; ++i) {
    SpeckleRecord r;
    r.amplitudes.resize(25);
    for (auto& v : r.amplitudes) v = static_cast<float>(rng.uniform());
    r.source_dim = 5;
    r.crop_dim = 5;
    pairs.add(std::move(r), random_pattern(4, static_cast<std::uint64_t>(i)));
  }
  write_spkl(dir / "pairs.spkl", pairs);
  const PairSet back = read_spkl(dir / "pairs.spkl");
  check(encode_spkl(back) == oracle::file_bytes(dir / "pairs.spkl"), "spkl re-encodes to identical bytes");
  bool same = back.size() == pairs.size();
  for (std::size_t i = 0; same && i < pairs.size(); ++i) {
    same = back[i].image == pairs[i].image && back[i].speckle.amplitudes == pairs[i].speckle.amplitudes;
  }
  check(same, "spkl records bit-exact");

  auto kind_of = [](auto&& decode) -> std::string {
    try {
      decode();
    } catch (const FormatError& e) {
      return to_string(e.kind());
    }
    return "none";
  };
  auto ck = encode_checkpoint(model, meta);
  auto sp = encode_spkl(pairs);
  auto shorter = [](std::vector<std::uint8_t> v) {
    v.pop_back();
    return v;
  };
  auto version99 = [](std::vector<std::uint8_t> v) {
    v[4] = 99;
    v[5] = v[6] = v[7] = 0;
    return v;
  };
  auto bad_magic = [](std::vector<std::uint8_t> v) {
    v[0] ^= 0xFF;
    return v;
  };
  const std::string t = to_string(FormatError::Kind::truncated);
  const std::string u = to_string(FormatError::Kind::unknown_version);
  const std::string c = to_string(FormatError::Kind::corrupt_header);
  check(kind_of([&] { decode_checkpoint(shorter(ck)); }) == t, "checkpoint truncated by one byte");
  check(kind_of([&] { decode_checkpoint(version99(ck)); }) == u, "checkpoint version 99");
  check(kind_of([&] { decode_checkpoint(bad_magic(ck)); }) == c, "checkpoint corrupt magic");
  check(kind_of([&] { decode_spkl(shorter(sp)); }) == t, "spkl truncated by one byte");
  check(kind_of([&] { decode_spkl(version99(sp)); }) == u, "spkl version 99");
  check(kind_of([&] { decode_spkl(bad_magic(sp)); }) == c, "spkl corrupt magic");

  // The CLI maps every format failure onto exit status 4.
  auto write = [&](const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                static_cast<std::streamsize>(bytes.size()));
  };
  write(dir / "short.mmfw", shorter(ck));
  write(dir / "v99.spkl", version99(sp));
  check(cli({"evaluate", "--checkpoint", (dir / "short.mmfw").string(), "--pairs", (dir / "pairs.spkl").string(),
             "--out", (dir / "e1").string()}) == cli::kFormat,
        "CLI exit 4 on truncated checkpoint");
  check(cli({"evaluate", "--checkpoint", (dir / "model.mmfw").string(), "--pairs", (dir / "v99.spkl").string(),
             "--out", (dir / "e2").string()}) == cli::kFormat,
        "CLI exit 4 on unknown SPKL version");

  fs::remove_all(dir);
  return {failures.empty(), failures.empty() ? "checkpoint and SPKL bit-exact; truncated, version-99 and "
                                               "bad-magic files raise their mapped errors, CLI exits 4"
                                             : "failed: " + failures.front()};
}

// ---- 7. determinism ---------------------------------------------------------

Outcome determinism() {
  const fs::path root = oracle::scratch_dir("acceptance_determinism");
  auto pipeline = [&](const fs::path& dir) {
    const std::string seed = "7";
    int rc = cli({"simulate", "--rng-seed", seed, "--out", (dir / "sim").string()});
    rc |= cli({"gen-random", "--count", "400", "--rng-seed", seed, "--no-png", "--out", (dir / "gen").string()});
    rc |= cli({"transmit", "--fibre", (dir / "sim" / "fibre.mmfw").string(), "--images",
               (dir / "gen" / "images.spkl").string(), "--rng-seed", seed, "--out", (dir / "tx").string()});
    rc |= cli({"train", "--pairs", (dir / "tx" / "pairs.spkl").string(), "--epochs", "5", "--lr", "2",
               "--lambda", "1e-6", "--threads", "1", "--rng-seed", seed, "--out", (dir / "train").string()});
    rc |= cli({"evaluate", "--checkpoint", (dir / "train" / "model.mmfw").string(), "--pairs",
               (dir / "tx" / "pairs.spkl").string(), "--out", (dir / "eval").string()});
    return rc;
  };
  const int rc_a = pipeline(root / "a");
  const int rc_b = pipeline(root / "b");
  const auto ck_a = oracle::file_bytes(root / "a" / "train" / "model.mmfw");
  const auto ck_b = oracle::file_bytes(root / "b" / "train" / "model.mmfw");
  const auto csv_a = oracle::file_text(root / "a" / "eval" / "report.csv");
  const auto csv_b = oracle::file_text(root / "b" / "eval" / "report.csv");
  bool epochs_same = true;
  for (int e = 1; e <= 5; ++e) {
    const auto name = checkpoint_path("train/checkpoints", static_cast<std::size_t>(e));
    epochs_same = epochs_same && oracle::file_bytes(root / "a" / name) == oracle::file_bytes(root / "b" / name);
  }
  const bool pass = rc_a == 0 && rc_b == 0 && !ck_a.empty() && ck_a == ck_b && epochs_same && !csv_a.empty() &&
                    csv_a == csv_b;
  fs::remove_all(root);
  return {pass, format("exit codes %d/%d; final checkpoint %s (%zu bytes); per-epoch checkpoints %s; "
                       "report.csv %s",
                       rc_a, rc_b, ck_a == ck_b ? "identical" : "DIFFERENT", ck_a.size(),
                       epochs_same ? "identical" : "DIFFERENT", csv_a == csv_b ? "identical" : "DIFFERENT")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient fidelity", 5.0, gradient_fidelity},
      {2, "hidden-model recovery", 120.0, hidden_model_recovery},
      {3, "synthetic end-to-end imaging", 1800.0, synthetic_imaging},
      {4, "metric correctness", 1.0, metric_correctness},
      {5, "decorrelation monotonicity", 60.0, decorrelation_monotonicity},
      {6, "format round trips", 1.0, format_round_trips},
      {7, "determinism", 0.0, determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = format("%.2f s", seconds);
    if (c.limit_seconds > 0) {
      timing += format(", limit %.0f s", c.limit_seconds);
      if (seconds >= c.limit_seconds) {
        outcome.pass = false;
        timing += ", TOO SLOW";
      }
    }
    if (!outcome.pass) ++failed;
    std::printf("%s [%d] %s: %s (%s)\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name, outcome.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
