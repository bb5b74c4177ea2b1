#include "advpatch/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

#include "advpatch/config.hpp"
#include "advpatch/errors.hpp"
#include "advpatch/metrics.hpp"
#include "advpatch/optimizer.hpp"
#include "advpatch/png_io.hpp"
#include "advpatch/scenes.hpp"
#include "advpatch/theory.hpp"

namespace advpatch {

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH"); fixed != nullptr && *fixed != '\0') {
    char* end = nullptr;
    const long long v = std::strtoll(fixed, &end, 10);
    if (end != nullptr && *end == '\0') now = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    log << "error: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const InvalidArgument& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ParseError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

std::filesystem::path output_dir(const RunConfig& cfg, const std::filesystem::path& out) {
  if (!out.empty()) return out;
  if (cfg.output_dir.empty()) throw InvalidArgument("no output directory: pass --out or set output_dir");
  return cfg.resolve(cfg.output_dir);
}

Image load_specified(const RunConfig& cfg) {
  const auto path = cfg.resolve(cfg.specified_image);
  if (!std::filesystem::exists(path)) throw InvalidArgument("specified image not found: " + path.string());
  return read_png(path);
}

PrintableColorSet load_colors(const RunConfig& cfg) {
  if (cfg.printable_colors.empty()) return PrintableColorSet::default_palette();
  const auto path = cfg.resolve(cfg.printable_colors);
  if (!std::filesystem::exists(path)) throw InvalidArgument("printable colors file not found: " + path.string());
  return PrintableColorSet::load(path);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "epoch,obj,css,tv,nps,total,train_total,lr\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.loss.obj << ',' << r.loss.css << ',' << r.loss.tv << ',' << r.loss.nps << ','
        << r.loss.total << ',' << r.train_total << ',' << r.lr << '\n';
  }
  return out.str();
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.placement = cfg.train.placement;
  o.threshold = cfg.eval.threshold;
  o.match.iou_threshold = cfg.eval.iou_threshold;
  o.ns_weight = cfg.eval.ns_weight;
  o.random_seed = cfg.eval.random_seed;
  return o;
}

}  // namespace

int cmd_generate(const std::filesystem::path& config, const std::filesystem::path& out, std::ostream& log) {
  return guarded(log, [&] {
    const std::string started = utc_timestamp();
    const RunConfig cfg = RunConfig::load(config);
    const auto dir = output_dir(cfg, out);
    const Image reference = load_specified(cfg);
    const PrintableColorSet colors = load_colors(cfg);
    const DatasetManifest manifest = load_dataset(cfg.resolve(cfg.dataset));
    const std::vector<LabeledImage> data = manifest.load_images();
    if (data.empty()) throw InvalidArgument("dataset is empty: " + cfg.resolve(cfg.dataset).string());
    const EnsembleSpec ensemble = cfg.build_ensemble();
    const SpecifiedImage specified = SpecifiedImage::from_image(reference, cfg.train.patch_side);
    std::filesystem::create_directories(dir);

    RunOptions opts;
    opts.checkpoint_path = dir / "checkpoint.bin";
    opts.checkpoint_every = cfg.checkpoint_every;
    opts.config_digest = cfg.digest();
    opts.on_epoch = [&log](const EpochRecord& r) {
      if (r.epoch % 10 == 0) {
        log << "epoch " << r.epoch << " total " << r.loss.total << " obj " << r.loss.obj << " lr " << r.lr << '\n';
      }
    };
    const TrainResult res = run(data, ensemble, specified, colors, cfg.train, opts);

    save_checkpoint({res.state, opts.config_digest}, opts.checkpoint_path);
    write_png(dir / "patch.png", res.patch.grid());
    write_text(dir / "loss_history.csv", history_csv(res.history));

    MetricsReport report = evaluate_patch(res.patch, data, ensemble.members, specified.values, eval_options(cfg));
    // Loss terms of the epoch whose patch was kept.
    for (const auto& r : res.history) {
      if (!report.loss || r.loss.total < report.loss->total) report.loss = r.loss;
    }
    report.config_digest = opts.config_digest;
    report.started = started;
    report.finished = utc_timestamp();
    write_text(dir / "report.json", report.to_json());
    log << "wrote " << (dir / "patch.png").string() << " after " << res.history.size() << " epochs"
        << (res.converged ? " (converged)" : "") << '\n';
    return kExitOk;
  });
}

int cmd_eval(const std::filesystem::path& patch_path, const std::filesystem::path& dataset,
             const std::filesystem::path& config, const std::filesystem::path& out, std::ostream& log) {
  return guarded(log, [&] {
    const std::string started = utc_timestamp();
    const RunConfig cfg = RunConfig::load(config);
    const auto dir = output_dir(cfg, out);
    if (!std::filesystem::exists(patch_path)) throw InvalidArgument("patch not found: " + patch_path.string());
    const Image raw = read_png(patch_path);
    if (raw.height() != raw.width()) throw InvalidArgument("patch must be square: " + patch_path.string());
    const Patch patch(raw);
    const Image reference = load_specified(cfg);
    const std::vector<LabeledImage> data = load_dataset(dataset).load_images();
    if (data.empty()) throw InvalidArgument("dataset is empty: " + dataset.string());
    const auto detectors = cfg.eval_detectors();
    const SpecifiedImage specified = SpecifiedImage::from_image(reference, patch.side());

    MetricsReport report = evaluate_patch(patch, data, detectors, specified.values, eval_options(cfg));
    report.config_digest = cfg.digest();
    report.started = started;
    report.finished = utc_timestamp();
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", report.to_json());
    write_text(dir / "map_table.csv", report.to_csv());
    log << "NS " << *report.naturalness << " ASR " << *report.attack_success;
    if (report.transferability) log << " TS " << *report.transferability;
    log << '\n';
    return kExitOk;
  });
}

namespace {

struct TheoryRow {
  std::string claim;
  double predicted;
  double observed;
  std::string status;  // pass, fail, or info
};

// Outputs uniform on [-2, 2] and a target on [-1, 1]; every tenth trial uses
// identical outputs to exercise the equality case.
std::vector<TheoryRow> jensen_rows(int trials, std::uint64_t seed) {
  long violations = 0, equality_errors = 0;
  for (int t = 0; t < trials; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t), 0x6a656eu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> out(-2.0, 2.0), tgt(-1.0, 1.0);
    const LossKind kind = static_cast<LossKind>(t % 3);
    const LossModel loss{kind, tgt(rng)};
    const int m = std::uniform_int_distribution<int>(2, 8)(rng);
    std::vector<double> f(m);
    if (t % 10 == 9) {
      std::fill(f.begin(), f.end(), out(rng));
    } else {
      for (double& v : f) v = out(rng);
    }
    const JensenResult r = jensen_check(loss, f);
    const double tol = 1e-12 * std::max(1.0, std::abs(r.mean_individual_loss));
    if (r.ensemble_loss > r.mean_individual_loss + tol) ++violations;
    const bool equal_losses = std::abs(r.ensemble_loss - r.mean_individual_loss) <= tol;
    // Strictly convex losses are tight exactly for identical outputs; the
    // absolute loss is tight exactly when no output lies across the target.
    bool tight = std::all_of(f.begin(), f.end(), [&](double v) { return v == f[0]; });
    if (kind == LossKind::Absolute) {
      tight = std::all_of(f.begin(), f.end(), [&](double v) { return v >= loss.target; }) ||
              std::all_of(f.begin(), f.end(), [&](double v) { return v <= loss.target; });
    }
    if (equal_losses != tight) ++equality_errors;
  }
  return {{"jensen_violations", 0.0, static_cast<double>(violations), violations == 0 ? "pass" : "fail"},
          {"jensen_equality_mismatches", 0.0, static_cast<double>(equality_errors),
           equality_errors == 0 ? "pass" : "fail"}};
}

}  // namespace

int cmd_verify_theory(int trials, std::uint64_t seed, const std::filesystem::path& out_csv, std::ostream& log) {
  return guarded(log, [&] {
    if (trials < 1) throw InvalidArgument("--trials must be >= 1");
    std::vector<TheoryRow> rows = jensen_rows(trials, seed);

    for (const double rho : {0.0, 0.3, 0.9}) {
      const VarianceResult v = ensemble_variance_mc({5, 1.0, rho, seed}, 100000);
      std::ostringstream name;
      name << "ensemble_variance_M5_sigma1_rho" << rho;
      const bool ok = std::abs(v.empirical - v.bienayme) <= 0.03 * v.bienayme;
      rows.push_back({name.str(), v.bienayme, v.empirical, ok ? "pass" : "fail"});
      rows.push_back({name.str() + "_two_rho_form", v.two_rho, v.empirical, "info"});
    }

    const double t = generalization_bound({5, 614, 0.05});
    rows.push_back({"generalization_bound_M5_N614_gamma0.05", 0.0612, t,
                    std::abs(t - 0.0612) <= 1e-4 ? "pass" : "fail"});
    const bool mono = generalization_bound({5, 1228, 0.05}) < t && generalization_bound({10, 614, 0.05}) > t;
    rows.push_back({"generalization_bound_monotone", 1.0, mono ? 1.0 : 0.0, mono ? "pass" : "fail"});

    std::ostringstream csv;
    csv << std::setprecision(10) << "claim,predicted,observed,status\n";
    bool all = true;
    for (const auto& r : rows) {
      csv << r.claim << ',' << r.predicted << ',' << r.observed << ',' << r.status << '\n';
      all = all && r.status != "fail";
      log << r.status << ' ' << r.claim << " predicted " << r.predicted << " observed " << r.observed << '\n';
    }
    if (out_csv.has_parent_path()) std::filesystem::create_directories(out_csv.parent_path());
    write_text(out_csv, csv.str());
    return all ? kExitOk : kExitFailed;
  });
}

int cmd_make_scenes(const std::filesystem::path& spec_path, const std::filesystem::path& out, std::ostream& log) {
  return guarded(log, [&] {
    std::ifstream in(spec_path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open scene spec: " + spec_path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const SceneSpecFile spec = SceneSpecFile::parse(buf.str());
    const auto scenes = generate_scenes(spec.scenes);
    write_scenes(scenes, out);
    write_png(out / "reference.png", make_reference_image(spec.reference_side, spec.reference_seed));
    PrintableColorSet::default_palette().save(out / "printable_colors.txt");
    log << "wrote " << scenes.size() << " scenes to " << out.string() << '\n';
    return kExitOk;
  });
}

}  // namespace advpatch
