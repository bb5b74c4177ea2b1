#include "advpatch/optimizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "advpatch/errors.hpp"

namespace advpatch {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("train: lr must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("train: gamma must lie in (0,1)");
  if (e_max < 0) throw InvalidArgument("train: e_max must be >= 0");
  if (plateau_patience < 1) throw InvalidArgument("train: plateau_patience must be >= 1");
  if (!(plateau_eps >= 0.0)) throw InvalidArgument("train: plateau_eps must be >= 0");
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (transforms_per_step < 1) throw InvalidArgument("train: transforms_per_step must be >= 1");
  if (!(init_std >= 0.0) || !std::isfinite(init_mean)) throw InvalidArgument("train: bad init distribution");
  if (patch_side < 1) throw InvalidArgument("train: patch_side must be >= 1");
  weights.validate();
  placement.validate();
  transforms.validate();
}

Patch init_patch(int side, double mean, double std, std::uint64_t seed) {
  if (side < 1) throw InvalidArgument("init_patch: side must be >= 1");
  Grid g(side, side, kRgb, mean);
  if (std > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(mean, std);
    for (double& v : g.values()) v = n(rng);
  }
  g.clamp();
  g.quantize_to_float();
  return Patch(std::move(g));
}

TrainState initial_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.patch = init_patch(config.patch_side, config.init_mean, config.init_std, config.seed);
  s.best_patch = s.patch;
  s.lr_current = config.lr;
  s.best_total = std::numeric_limits<double>::infinity();
  s.last_total = std::numeric_limits<double>::quiet_NaN();
  s.adam_m = Grid(config.patch_side, config.patch_side, kRgb);
  s.adam_v = Grid(config.patch_side, config.patch_side, kRgb);
  // Separate stream from the patch initializer.
  s.rng.seed(config.seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

std::vector<Scene> prepare_scenes(std::span<const LabeledImage> data, const EnsembleSpec& ensemble,
                                  const PlacementSpec& placement) {
  std::vector<Scene> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    Scene s;
    s.image = d.image;
    s.layout = build_person_mask(d.image.height(), d.image.width(), d.boxes, placement);
    prepare_scene(s, ensemble);
    out.push_back(std::move(s));
  }
  return out;
}

LossBreakdown step(TrainState& state, std::span<const Scene> batch, const EnsembleSpec& ensemble,
                   const SpecifiedImage& specified, const PrintableColorSet& colors, const TrainConfig& config) {
  if (batch.empty()) throw InvalidArgument("step: empty batch");
  std::mt19937_64 rng = state.rng;
  std::vector<TransformParams> transforms;
  for (int i = 0; i < config.transforms_per_step; ++i) transforms.push_back(sample_transform(rng(), config.transforms));

  const LossEvaluation ev =
      loss_gradient(config.weights, state.patch, batch, ensemble, specified, transforms, colors, config.loss_options);

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const std::int64_t t = state.adam_step + 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  Grid m = state.adam_m, v = state.adam_v, p = state.patch.grid();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double g = ev.gradient.values()[i];
    m.values()[i] = b1 * m.values()[i] + (1.0 - b1) * g;
    v.values()[i] = b2 * v.values()[i] + (1.0 - b2) * g * g;
    p.values()[i] -= state.lr_current * (m.values()[i] / c1) / (std::sqrt(v.values()[i] / c2) + eps);
  }
  p.clamp();
  p.quantize_to_float();
  m.quantize_to_float();
  v.quantize_to_float();

  state.patch = Patch(std::move(p));
  state.adam_m = std::move(m);
  state.adam_v = std::move(v);
  state.adam_step = t;
  state.rng = rng;
  return ev.breakdown;
}

bool plateau_schedule(TrainState& state, double current_total, const TrainConfig& config) {
  state.last_total = current_total;
  if (state.best_total - current_total >= config.plateau_eps) {
    state.best_total = current_total;
    state.epochs_since_improvement = 0;
    return false;
  }
  state.best_total = std::min(state.best_total, current_total);
  if (++state.epochs_since_improvement >= config.plateau_patience) {
    state.lr_current *= config.gamma;
    state.epochs_since_improvement = 0;
    ++state.decays;
    return true;
  }
  return false;
}

namespace {

constexpr char kMagic[4] = {'M', 'V', 'P', '1'};
constexpr char kTrailer[4] = {'T', 'R', 'L', '1'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void floats(const Grid& g) {
    for (double v : g.values()) put(static_cast<float>(v));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string where) : in_(in), where_(std::move(where)) {}
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw ParseError(where_ + ": truncated checkpoint");
    return v;
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw ParseError(where_ + ": truncated checkpoint");
    return s;
  }
  Grid floats(int h, int w, int c) {
    Grid g(h, w, c);
    for (double& v : g.values()) v = get<float>();
    return g;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::string where_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const TrainState& s = ckpt.state;
  const Grid& p = s.patch.grid();
  if (!s.adam_m.same_shape(p) || !s.adam_v.same_shape(p) || !s.best_patch.grid().same_shape(p)) {
    throw InvalidArgument("checkpoint: state grids disagree in shape");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write checkpoint: " + path.string());
  Writer w(out);
  w.bytes(kMagic, 4);
  w.put(static_cast<std::uint32_t>(p.height()));
  w.put(static_cast<std::uint32_t>(p.width()));
  w.put(static_cast<std::uint32_t>(p.channels()));
  w.floats(p);
  w.put(static_cast<std::int64_t>(s.epoch));
  w.put(s.last_total);
  w.floats(s.adam_m);
  w.floats(s.adam_v);

  w.bytes(kTrailer, 4);
  w.put(s.lr_current);
  w.put(s.best_total);
  w.put(static_cast<std::int64_t>(s.epochs_since_improvement));
  w.put(static_cast<std::int64_t>(s.decays));
  w.put(static_cast<std::int64_t>(s.adam_step));
  w.put(ckpt.config_digest);
  w.floats(s.best_patch.grid());
  w.put(static_cast<std::uint64_t>(s.history.size()));
  for (const auto& r : s.history) {
    w.put(static_cast<std::int64_t>(r.epoch));
    for (double v : {r.loss.obj, r.loss.css, r.loss.tv, r.loss.nps, r.loss.total, r.train_total, r.lr}) w.put(v);
  }
  std::ostringstream rng;
  rng << s.rng;
  const std::string text = rng.str();
  w.put(static_cast<std::uint64_t>(text.size()));
  w.bytes(text.data(), text.size());
  if (!out) throw ParseError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path.string());
  Reader r(in, path.string());
  if (r.bytes(4) != std::string(kMagic, 4)) throw ParseError(path.string() + ": not a checkpoint (bad magic)");
  const auto h = r.get<std::uint32_t>(), w = r.get<std::uint32_t>(), c = r.get<std::uint32_t>();
  if (h == 0 || h != w || c != kRgb || h > 1u << 14) throw ParseError(path.string() + ": bad patch dimensions");
  const int side = static_cast<int>(h);

  Checkpoint ck;
  TrainState& s = ck.state;
  s.patch = Patch(r.floats(side, side, kRgb));
  s.epoch = r.get<std::int64_t>();
  s.last_total = r.get<double>();
  s.adam_m = r.floats(side, side, kRgb);
  s.adam_v = r.floats(side, side, kRgb);

  if (r.bytes(4) != std::string(kTrailer, 4)) throw ParseError(path.string() + ": missing state trailer");
  s.lr_current = r.get<double>();
  s.best_total = r.get<double>();
  s.epochs_since_improvement = static_cast<int>(r.get<std::int64_t>());
  s.decays = static_cast<int>(r.get<std::int64_t>());
  s.adam_step = r.get<std::int64_t>();
  ck.config_digest = r.get<std::uint64_t>();
  s.best_patch = Patch(r.floats(side, side, kRgb));
  const auto n = r.get<std::uint64_t>();
  if (n > (1u << 24)) throw ParseError(path.string() + ": implausible history length");
  s.history.resize(n);
  for (auto& e : s.history) {
    e.epoch = r.get<std::int64_t>();
    e.loss.obj = r.get<double>();
    e.loss.css = r.get<double>();
    e.loss.tv = r.get<double>();
    e.loss.nps = r.get<double>();
    e.loss.total = r.get<double>();
    e.train_total = r.get<double>();
    e.lr = r.get<double>();
  }
  const auto len = r.get<std::uint64_t>();
  if (len > (1u << 20)) throw ParseError(path.string() + ": implausible rng state");
  std::istringstream rng(r.bytes(len));
  rng >> s.rng;
  if (!rng) throw ParseError(path.string() + ": bad rng state");
  if (!r.at_end()) throw ParseError(path.string() + ": trailing bytes");
  return ck;
}

TrainResult run(std::span<const LabeledImage> dataset, const EnsembleSpec& ensemble, const SpecifiedImage& specified,
                const PrintableColorSet& colors, const TrainConfig& config, const RunOptions& options) {
  config.validate();
  ensemble.validate();
  colors.validate();
  if (dataset.empty()) throw InvalidArgument("run: empty dataset");
  if (!specified.values.same_shape(Grid(config.patch_side, config.patch_side, kRgb))) {
    throw InvalidArgument("run: specified image must match the patch size");
  }

  TrainState state = options.resume ? *options.resume : initial_state(config);
  if (state.patch.side() != config.patch_side) throw InvalidArgument("run: resumed state has a different patch size");
  const std::vector<Scene> scenes = prepare_scenes(dataset, ensemble, config.placement);

  auto checkpoint = [&](const TrainState& s) {
    if (!options.checkpoint_path.empty()) save_checkpoint({s, options.config_digest}, options.checkpoint_path);
  };

  // One transform draw for every end-of-epoch evaluation, independent of
  // the training stream so resuming does not change it.
  std::vector<TransformParams> eval_transforms;
  std::mt19937_64 eval_rng(config.seed ^ 0x5851f42d4c957f2dULL);
  for (int i = 0; i < config.transforms_per_step; ++i) {
    eval_transforms.push_back(sample_transform(eval_rng(), config.transforms));
  }

  TrainResult result;
  std::vector<std::size_t> order(scenes.size());
  std::vector<Scene> batch;
  while (state.epoch < config.e_max) {
    const TrainState before = state;
    double train_sum = 0.0;
    int steps = 0;
    LossBreakdown eval;
    try {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), state.rng);
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        batch.clear();
        for (std::size_t i = start; i < end; ++i) batch.push_back(scenes[order[i]]);
        train_sum += step(state, batch, ensemble, specified, colors, config).total;
        ++steps;
      }
      eval = loss_value(config.weights, state.patch, scenes, ensemble, specified, eval_transforms, colors,
                        config.loss_options);
    } catch (const NumericError&) {
      checkpoint(before);
      throw;
    }
    const EpochRecord rec{state.epoch + 1, eval, train_sum / steps, state.lr_current};
    const double previous = state.last_total;
    const bool improved = rec.loss.total < state.best_total;
    const int decays_before = state.decays;
    plateau_schedule(state, rec.loss.total, config);
    if (improved) state.best_patch = state.patch;
    state.epoch = rec.epoch;
    state.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (options.checkpoint_every > 0 && state.epoch % options.checkpoint_every == 0) checkpoint(state);
    if (decays_before >= 2 && std::isfinite(previous) && std::abs(previous - rec.loss.total) < config.plateau_eps) {
      result.converged = true;
      break;
    }
  }
  result.patch = state.best_patch;
  result.history = state.history;
  result.state = std::move(state);
  return result;
}

}  // namespace advpatch
