#include "advpatch/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "advpatch/errors.hpp"
#include "advpatch/metrics.hpp"
#include "advpatch/toy_detector.hpp"
#include "json.hpp"

namespace advpatch {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

// Typed reads from one JSON object, rejecting keys it was not told about.
class Section {
 public:
  Section(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw InvalidArgument(path_ + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
      if (!ok.count(k)) throw InvalidArgument("unknown config key '" + where(k) + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void number(const char* key, double& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_number()) throw InvalidArgument(where(key) + ": expected a number");
    out = j_.at(key).get<double>();
  }
  void integer(const char* key, int& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_number_integer()) throw InvalidArgument(where(key) + ": expected an integer");
    const auto v = j_.at(key).get<long long>();
    if (v < INT32_MIN || v > INT32_MAX) throw InvalidArgument(where(key) + ": out of range");
    out = static_cast<int>(v);
  }
  void seed(const char* key, std::uint64_t& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      throw InvalidArgument(where(key) + ": expected a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }
  void boolean(const char* key, bool& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_boolean()) throw InvalidArgument(where(key) + ": expected true or false");
    out = j_.at(key).get<bool>();
  }
  void string(const char* key, std::string& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_string()) throw InvalidArgument(where(key) + ": expected a string");
    out = j_.at(key).get<std::string>();
  }
  void strings(const char* key, std::vector<std::string>& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) throw InvalidArgument(where(key) + ": expected an array of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) throw InvalidArgument(where(key) + ": expected an array of strings");
      out.push_back(e.get<std::string>());
    }
  }

 private:
  const json& j_;
  std::string path_;
};

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  const json doc = parse_json(text, "config");
  const Section top(doc, "", {"weights", "train", "patch", "placement", "transforms", "detectors", "ensemble", "eval",
                              "specified_image", "printable_colors", "dataset", "output_dir"});
  RunConfig c;
  c.base_dir = base_dir;
  TrainConfig& t = c.train;

  if (top.has("weights")) {
    const Section s(top.raw("weights"), "weights", {"alpha", "beta", "lambda_css"});
    s.number("alpha", t.weights.alpha);
    s.number("beta", t.weights.beta);
    s.number("lambda_css", t.weights.lambda_css);
  }
  if (top.has("train")) {
    const Section s(top.raw("train"), "train",
                    {"lr", "gamma", "e_max", "plateau_patience", "plateau_eps", "batch_size", "transforms_per_step",
                     "seed", "init_mean", "init_std", "checkpoint_every", "normalize_losses"});
    s.number("lr", t.lr);
    s.number("gamma", t.gamma);
    s.integer("e_max", t.e_max);
    s.integer("plateau_patience", t.plateau_patience);
    s.number("plateau_eps", t.plateau_eps);
    s.integer("batch_size", t.batch_size);
    s.integer("transforms_per_step", t.transforms_per_step);
    s.seed("seed", t.seed);
    s.number("init_mean", t.init_mean);
    s.number("init_std", t.init_std);
    s.integer("checkpoint_every", c.checkpoint_every);
    s.boolean("normalize_losses", t.loss_options.normalize);
  }
  if (top.has("patch")) {
    const Section s(top.raw("patch"), "patch", {"side"});
    s.integer("side", t.patch_side);
  }
  if (top.has("placement")) {
    const Section s(top.raw("placement"), "placement", {"scale", "vertical_anchor"});
    s.number("scale", t.placement.scale);
    s.number("vertical_anchor", t.placement.vertical_anchor);
  }
  if (top.has("transforms")) {
    const Section s(top.raw("transforms"), "transforms",
                    {"max_rotation", "max_crop", "min_scale", "max_scale", "max_brightness", "max_noise_sigma",
                     "allow_flip"});
    TransformRanges& r = t.transforms;
    s.number("max_rotation", r.max_rotation);
    s.number("max_crop", r.max_crop);
    s.number("min_scale", r.min_scale);
    s.number("max_scale", r.max_scale);
    s.number("max_brightness", r.max_brightness);
    s.number("max_noise_sigma", r.max_noise_sigma);
    s.boolean("allow_flip", r.allow_flip);
  }

  if (!top.has("detectors")) throw InvalidArgument("config: 'detectors' is required");
  if (!top.raw("detectors").is_object() || top.raw("detectors").empty()) {
    throw InvalidArgument("detectors: expected a non-empty object of named detectors");
  }
  for (const auto& [name, body] : top.raw("detectors").items()) {
    const Section s(body, "detectors." + name, {"type", "seed", "templates"});
    DetectorConfig d;
    s.string("type", d.type);
    s.seed("seed", d.seed);
    s.integer("templates", d.templates);
    if (d.type != "toy") throw InvalidArgument(s.where("type") + ": unsupported detector type '" + d.type + "'");
    if (d.templates < 1) throw InvalidArgument(s.where("templates") + ": must be >= 1");
    c.detectors[name] = d;
  }

  if (!top.has("ensemble")) throw InvalidArgument("config: 'ensemble' is required");
  {
    const Section s(top.raw("ensemble"), "ensemble", {"mode", "members"});
    std::string mode = "average";
    s.string("mode", mode);
    try {
      t.ensemble_mode = parse_ensemble_mode(mode);
    } catch (const InvalidArgument&) {
      throw InvalidArgument("ensemble.mode: expected 'average' or 'max'");
    }
    s.strings("members", c.ensemble_members);
    if (c.ensemble_members.empty()) throw InvalidArgument("ensemble.members: must name at least one detector");
  }
  if (top.has("eval")) {
    const Section s(top.raw("eval"), "eval", {"detectors", "threshold", "iou_threshold", "ns_weight", "random_seed"});
    s.strings("detectors", c.eval.detectors);
    s.number("threshold", c.eval.threshold);
    s.number("iou_threshold", c.eval.iou_threshold);
    s.number("ns_weight", c.eval.ns_weight);
    s.seed("random_seed", c.eval.random_seed);
  }
  for (const auto& names : {c.ensemble_members, c.eval.detectors}) {
    for (const auto& n : names) {
      if (!c.detectors.count(n)) throw InvalidArgument("config: unknown detector '" + n + "'");
    }
  }

  top.string("specified_image", c.specified_image);
  top.string("printable_colors", c.printable_colors);
  top.string("dataset", c.dataset);
  top.string("output_dir", c.output_dir);
  if (c.specified_image.empty()) throw InvalidArgument("config: 'specified_image' is required");
  if (c.dataset.empty()) throw InvalidArgument("config: 'dataset' is required");

  t.validate();
  if (c.checkpoint_every < 0) throw InvalidArgument("train.checkpoint_every: must be >= 0");
  if (!(c.eval.threshold >= 0.0 && c.eval.threshold <= 1.0)) throw InvalidArgument("eval.threshold: outside [0,1]");
  MatchConfig{c.eval.iou_threshold}.validate();
  if (!(c.eval.ns_weight >= 0.0 && c.eval.ns_weight <= 1.0)) throw InvalidArgument("eval.ns_weight: outside [0,1]");
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open config: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

std::string RunConfig::canonical_json() const {
  const TrainConfig& t = train;
  json j;
  j["weights"] = {{"alpha", t.weights.alpha}, {"beta", t.weights.beta}, {"lambda_css", t.weights.lambda_css}};
  j["train"] = {{"lr", t.lr},
                {"gamma", t.gamma},
                {"e_max", t.e_max},
                {"plateau_patience", t.plateau_patience},
                {"plateau_eps", t.plateau_eps},
                {"batch_size", t.batch_size},
                {"transforms_per_step", t.transforms_per_step},
                {"seed", t.seed},
                {"init_mean", t.init_mean},
                {"init_std", t.init_std},
                {"checkpoint_every", checkpoint_every},
                {"normalize_losses", t.loss_options.normalize}};
  j["patch"] = {{"side", t.patch_side}};
  j["placement"] = {{"scale", t.placement.scale}, {"vertical_anchor", t.placement.vertical_anchor}};
  const TransformRanges& r = t.transforms;
  j["transforms"] = {{"max_rotation", r.max_rotation},     {"max_crop", r.max_crop},
                     {"min_scale", r.min_scale},           {"max_scale", r.max_scale},
                     {"max_brightness", r.max_brightness}, {"max_noise_sigma", r.max_noise_sigma},
                     {"allow_flip", r.allow_flip}};
  json dets = json::object();
  for (const auto& [name, d] : detectors) dets[name] = {{"type", d.type}, {"seed", d.seed}, {"templates", d.templates}};
  j["detectors"] = dets;
  j["ensemble"] = {{"mode", std::string(to_string(t.ensemble_mode))}, {"members", ensemble_members}};
  j["eval"] = {{"detectors", eval.detectors},
               {"threshold", eval.threshold},
               {"iou_threshold", eval.iou_threshold},
               {"ns_weight", eval.ns_weight},
               {"random_seed", eval.random_seed}};
  j["specified_image"] = specified_image;
  j["printable_colors"] = printable_colors;
  j["dataset"] = dataset;
  j["output_dir"] = output_dir;
  return j.dump();
}

std::uint64_t RunConfig::digest() const { return fnv1a64(canonical_json()); }

std::filesystem::path RunConfig::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

DetectorPtr RunConfig::build_detector(const std::string& name) const {
  const auto it = detectors.find(name);
  if (it == detectors.end()) throw InvalidArgument("config: unknown detector '" + name + "'");
  return make_toy_detector(it->second.seed, it->second.templates, name);
}

EnsembleSpec RunConfig::build_ensemble() const {
  EnsembleSpec e;
  e.mode = train.ensemble_mode;
  for (const auto& n : ensemble_members) e.members.push_back(build_detector(n));
  return e;
}

std::vector<DetectorPtr> RunConfig::eval_detectors() const {
  std::vector<DetectorPtr> out;
  for (const auto& n : eval.detectors.empty() ? ensemble_members : eval.detectors) out.push_back(build_detector(n));
  return out;
}

SceneSpecFile SceneSpecFile::parse(const std::string& text) {
  const json doc = parse_json(text, "scene spec");
  const Section s(doc, "", {"count", "height", "width", "min_persons", "max_persons", "clutter_density", "texture",
                            "texture_cell", "min_contrast", "max_contrast", "min_background", "max_background",
                            "seed", "reference_seed", "reference_side"});
  SceneSpecFile f;
  SyntheticSceneSpec& sp = f.scenes;
  s.integer("count", sp.count);
  s.integer("height", sp.height);
  s.integer("width", sp.width);
  s.integer("min_persons", sp.min_persons);
  s.integer("max_persons", sp.max_persons);
  s.number("clutter_density", sp.clutter_density);
  s.number("texture", sp.texture);
  s.integer("texture_cell", sp.texture_cell);
  s.number("min_contrast", sp.min_contrast);
  s.number("max_contrast", sp.max_contrast);
  s.number("min_background", sp.min_background);
  s.number("max_background", sp.max_background);
  s.seed("seed", sp.seed);
  s.seed("reference_seed", f.reference_seed);
  s.integer("reference_side", f.reference_side);
  sp.validate();
  if (f.reference_side < 1) throw InvalidArgument("reference_side: must be >= 1");
  return f;
}

}  // namespace advpatch
