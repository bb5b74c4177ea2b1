#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "advpatch/commands.hpp"
#include "advpatch/composition.hpp"
#include "advpatch/ensemble.hpp"
#include "advpatch/errors.hpp"
#include "advpatch/losses.hpp"
#include "advpatch/metrics.hpp"
#include "advpatch/optimizer.hpp"
#include "advpatch/scenes.hpp"
#include "advpatch/theory.hpp"
#include "advpatch/toy_detector.hpp"

namespace py = pybind11;
using namespace advpatch;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Box = std::tuple<double, double, double, double>;

// (H, W) or (H, W, C) float array <-> Grid
Grid to_grid(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw InvalidArgument("expected an (H, W) or (H, W, C) array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Grid g(h, w, c);
  std::copy(a.data(), a.data() + g.size(), g.values().begin());
  return g;
}

Array to_array(const Grid& g) {
  Array a({g.height(), g.width(), g.channels()});
  std::copy(g.values().begin(), g.values().end(), a.mutable_data());
  return a;
}

std::vector<BoundingBox> to_boxes(const std::vector<Box>& boxes) {
  std::vector<BoundingBox> out;
  for (const auto& [x, y, w, h] : boxes) out.push_back({x, y, w, h, kPersonLabel});
  return out;
}

std::vector<Box> from_boxes(const std::vector<BoundingBox>& boxes) {
  std::vector<Box> out;
  for (const auto& b : boxes) out.emplace_back(b.x, b.y, b.w, b.h);
  return out;
}

// detections as (x, y, w, h, score) with the score taken as the person score
using ScoredBox = std::tuple<double, double, double, double, double>;

std::vector<DetectionSet> to_detections(const std::vector<std::vector<ScoredBox>>& per_image) {
  std::vector<DetectionSet> out(per_image.size());
  for (std::size_t i = 0; i < per_image.size(); ++i)
    for (const auto& [x, y, w, h, s] : per_image[i])
      out[i].detections.push_back(Detection{BoundingBox{x, y, w, h, kPersonLabel}, s, {{kPersonLabel, 1.0}}});
  return out;
}

std::vector<LabeledImage> to_scenes(const std::vector<std::pair<Array, std::vector<Box>>>& scenes) {
  std::vector<LabeledImage> out;
  for (const auto& [img, boxes] : scenes) out.push_back({to_grid(img), to_boxes(boxes)});
  return out;
}

EnsembleSpec to_ensemble(const std::vector<std::shared_ptr<ToyTemplateDetector>>& dets, const std::string& mode) {
  EnsembleSpec e;
  e.members.assign(dets.begin(), dets.end());
  e.mode = parse_ensemble_mode(mode);
  e.validate();
  return e;
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "squared") return LossKind::Squared;
  if (s == "absolute") return LossKind::Absolute;
  if (s == "logistic") return LossKind::Logistic;
  throw InvalidArgument("unknown loss kind '" + s + "'");
}

// runs a command, returning (exit code, log text)
template <class F>
std::pair<int, std::string> logged(F&& f) {
  std::ostringstream log;
  const int code = f(log);
  return {code, log.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ensemble adversarial patch toolkit";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<UndefinedMetric>(m, "UndefinedMetric", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);

  // imaging
  m.def("compose", [](const Array& image, const Array& patch, const std::vector<Box>& boxes, double scale,
                      double vertical_anchor) {
    const Grid img = to_grid(image);
    const PlacementSpec placement{scale, vertical_anchor};
    const auto layout = build_person_mask(img.height(), img.width(), to_boxes(boxes), placement);
    return to_array(compose(img, Patch(to_grid(patch)), layout));
  }, py::arg("image"), py::arg("patch"), py::arg("boxes"), py::arg("scale") = 0.3,
        py::arg("vertical_anchor") = 0.35);
  m.def("person_mask", [](int height, int width, const std::vector<Box>& boxes, double scale, double vertical_anchor) {
    return to_array(build_person_mask(height, width, to_boxes(boxes), {scale, vertical_anchor}).mask);
  }, py::arg("height"), py::arg("width"), py::arg("boxes"), py::arg("scale") = 0.3, py::arg("vertical_anchor") = 0.35);
  m.def("make_reference_image", [](int side, std::uint64_t seed) { return to_array(make_reference_image(side, seed)); },
        py::arg("side"), py::arg("seed") = 0);
  m.def("generate_scenes", [](int count, std::uint64_t seed, int height, int width) {
    SyntheticSceneSpec sp;
    sp.count = count;
    sp.seed = seed;
    sp.height = height;
    sp.width = width;
    std::vector<std::pair<Array, std::vector<Box>>> out;
    for (const auto& li : generate_scenes(sp)) out.emplace_back(to_array(li.image), from_boxes(li.boxes));
    return out;
  }, py::arg("count"), py::arg("seed") = 0, py::arg("height") = 128, py::arg("width") = 128);

  // detectors
  py::class_<ToyTemplateDetector, std::shared_ptr<ToyTemplateDetector>>(m, "ToyDetector")
      .def_property_readonly("name", &ToyTemplateDetector::name)
      .def_property_readonly("channel_weights", &ToyTemplateDetector::channel_weights)
      .def("person_confidence", [](const ToyTemplateDetector& d, const Array& img) {
        return d.person_confidence(to_grid(img));
      })
      .def("confidence_and_gradient", [](const ToyTemplateDetector& d, const Array& img) {
        Grid grad;
        const double c = d.person_confidence(to_grid(img), grad);
        return std::make_pair(c, to_array(grad));
      })
      .def("detect", [](const ToyTemplateDetector& d, const Array& img) {
        std::vector<ScoredBox> out;
        for (const auto& x : d.detect(to_grid(img)).detections)
          out.emplace_back(x.box.x, x.box.y, x.box.w, x.box.h, x.person_score());
        return out;
      });
  m.def("make_toy_detector", &make_toy_detector, py::arg("seed"), py::arg("n_templates") = 3, py::arg("name") = "");
  m.def("ensemble_confidence", [](const std::vector<std::shared_ptr<ToyTemplateDetector>>& dets, const Array& img,
                                  const std::string& mode) {
    return ensemble_confidence(to_ensemble(dets, mode), to_grid(img));
  }, py::arg("detectors"), py::arg("image"), py::arg("mode") = "average");

  // losses
  m.def("tv_loss", [](const Array& p, bool normalize) { return tv_loss(to_grid(p), {normalize}); }, py::arg("patch"),
        py::arg("normalize") = true);
  m.def("nps_loss", [](const Array& p, bool normalize) {
    return nps_loss(to_grid(p), PrintableColorSet::default_palette(), {normalize});
  }, py::arg("patch"), py::arg("normalize") = true);
  m.def("css_loss", [](const Array& p, const Array& specified, bool normalize) {
    const TransformParams id = TransformParams::identity();
    return css_loss(to_grid(p), to_grid(specified), std::span(&id, 1), {normalize});
  }, py::arg("patch"), py::arg("specified"), py::arg("normalize") = true);
  m.def("total_loss", [](double obj, double css, double tv, double nps, double alpha, double beta, double lambda_css) {
    return total_loss({alpha, beta, lambda_css}, obj, css, tv, nps).total;
  }, py::arg("obj"), py::arg("css"), py::arg("tv"), py::arg("nps"), py::arg("alpha") = 0.01, py::arg("beta") = 2.5,
        py::arg("lambda_css") = 2.5);

  // optimizer
  m.def("init_patch", [](int side, double mean, double std, std::uint64_t seed) {
    return to_array(init_patch(side, mean, std, seed).grid());
  }, py::arg("side"), py::arg("mean") = 0.5, py::arg("std") = 0.1, py::arg("seed") = 0);
  m.def("train", [](const std::vector<std::pair<Array, std::vector<Box>>>& scenes,
                    const std::vector<std::shared_ptr<ToyTemplateDetector>>& dets, const Array& specified, int epochs,
                    std::uint64_t seed, const std::string& mode, int patch_side, int batch_size) {
    TrainConfig c;
    c.e_max = epochs;
    c.seed = seed;
    c.patch_side = patch_side;
    c.batch_size = batch_size;
    c.ensemble_mode = parse_ensemble_mode(mode);
    const auto data = to_scenes(scenes);
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = run(data, to_ensemble(dets, mode), SpecifiedImage::from_image(to_grid(specified), patch_side),
              PrintableColorSet::default_palette(), c);
    }
    std::vector<double> totals, objs;
    for (const auto& rec : r.history) {
      totals.push_back(rec.loss.total);
      objs.push_back(rec.loss.obj);
    }
    py::dict out;
    out["patch"] = to_array(r.patch.grid());
    out["total"] = totals;
    out["obj"] = objs;
    out["lr"] = r.state.lr_current;
    out["converged"] = r.converged;
    return out;
  }, py::arg("scenes"), py::arg("detectors"), py::arg("specified"), py::arg("epochs") = 10, py::arg("seed") = 0,
        py::arg("mode") = "average", py::arg("patch_side") = 48, py::arg("batch_size") = 16);

  // metrics
  m.def("iou", [](const Box& a, const Box& b) { return iou(to_boxes({a})[0], to_boxes({b})[0]); });
  m.def("average_precision", [](const std::vector<std::vector<ScoredBox>>& dets,
                                const std::vector<std::vector<Box>>& gt, double iou_threshold) {
    std::vector<std::vector<BoundingBox>> g;
    for (const auto& boxes : gt) g.push_back(to_boxes(boxes));
    MatchConfig match;
    match.iou_threshold = iou_threshold;
    return average_precision(to_detections(dets), g, match);
  }, py::arg("detections"), py::arg("ground_truth"), py::arg("iou_threshold") = 0.5);
  m.def("naturalness_score", [](const Array& patch, const Array& specified, std::uint64_t random_seed, double w) {
    return naturalness_score(NaturalnessInputs::make(to_grid(patch), to_grid(specified), random_seed, w));
  }, py::arg("patch"), py::arg("specified"), py::arg("random_seed") = 7, py::arg("ns_weight") = 0.5);
  m.def("transferability_score", [](std::vector<double> patched, std::vector<double> grey, std::vector<double> random) {
    return transferability_score({std::move(patched), std::move(grey), std::move(random)});
  }, py::arg("patched"), py::arg("grey"), py::arg("random"));

  // theory
  m.def("jensen_check", [](const std::string& kind, double target, const std::vector<double>& outputs) {
    const JensenResult r = jensen_check({parse_loss_kind(kind), target}, outputs);
    return std::make_pair(r.ensemble_loss, r.mean_individual_loss);
  }, py::arg("kind"), py::arg("target"), py::arg("outputs"));
  m.def("ensemble_variance", [](int members, double sigma, double rho, std::uint64_t seed, long samples) {
    const VarianceResult r = ensemble_variance_mc({members, sigma, rho, seed}, samples);
    py::dict out;
    out["empirical"] = r.empirical;
    out["standard_error"] = r.standard_error;
    out["bienayme"] = r.bienayme;
    out["two_rho"] = r.two_rho;
    return out;
  }, py::arg("members"), py::arg("sigma"), py::arg("rho"), py::arg("seed") = 0, py::arg("samples") = 100000);
  m.def("generalization_bound", [](long members, long samples, double gamma) {
    return generalization_bound({members, samples, gamma});
  }, py::arg("members"), py::arg("samples"), py::arg("gamma") = 0.05);

  // command verbs; each returns (exit code, log)
  m.def("cmd_generate", [](const std::filesystem::path& config, const std::filesystem::path& out) {
    return logged([&](std::ostream& log) { return cmd_generate(config, out, log); });
  }, py::arg("config"), py::arg("out"));
  m.def("cmd_eval", [](const std::filesystem::path& patch, const std::filesystem::path& dataset,
                       const std::filesystem::path& config, const std::filesystem::path& out) {
    return logged([&](std::ostream& log) { return cmd_eval(patch, dataset, config, out, log); });
  }, py::arg("patch"), py::arg("dataset"), py::arg("config"), py::arg("out"));
  m.def("cmd_verify_theory", [](int trials, std::uint64_t seed, const std::filesystem::path& out) {
    return logged([&](std::ostream& log) { return cmd_verify_theory(trials, seed, out, log); });
  }, py::arg("trials"), py::arg("seed"), py::arg("out"));
  m.def("cmd_make_scenes", [](const std::filesystem::path& spec, const std::filesystem::path& out) {
    return logged([&](std::ostream& log) { return cmd_make_scenes(spec, out, log); });
  }, py::arg("spec"), py::arg("out"));
}
