#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stsim/config.hpp"
#include "stsim/dataset.hpp"
#include "stsim/gel_compliance.hpp"
#include "stsim/scenario_config.hpp"
#include "stsim/tactile_render.hpp"
#include "stsim/training.hpp"

namespace py = pybind11;
using namespace stsim;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Grid<double> to_grid(const DoubleArray& a) {
  if (a.ndim() != 2) throw InvalidInput("expected a 2-D array (rows, cols)");
  Grid<double> g(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), g.values().begin());
  return g;
}

template <typename T>
py::array_t<T> from_grid(const Grid<T>& g) {
  py::array_t<T> out({g.height(), g.width()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

py::array_t<float> from_image(const RgbImage& img) {
  py::array_t<float> out({img.height(), img.width(), std::size_t{3}});
  std::copy(img.values().begin(), img.values().end(), out.mutable_data());
  return out;
}

HeightMap height_map(const DoubleArray& depth, double pitch, double gel_thickness) {
  return clip_depth(to_grid(depth), pitch, gel_thickness);
}

NormalField normals_of(const HeightMap& h, const std::string& method, int radius) {
  if (method == "covariance") return normals_from_covariance(h, radius);
  if (method == "gradient") return normals_from_gradient(h);
  throw InvalidInput("unknown normal method '" + method + "' (covariance | gradient)");
}

py::dict episode_dict(const EpisodeRecord& rec) {
  const std::size_t T = rec.frames.size(), n = rec.meta.resolution;
  py::array_t<float> visual({T, n, n, std::size_t{3}}), tactile({T, n, n, std::size_t{3}});
  py::array_t<float> pose({T, std::size_t{7}});
  py::array_t<bool> active(T);
  const std::size_t frame = n * n * 3;
  for (std::size_t k = 0; k < T; ++k) {
    const Frame& f = rec.frames[k];
    if (!f.visual.empty()) std::copy(f.visual.values().begin(), f.visual.values().end(), visual.mutable_data() + k * frame);
    if (!f.tactile.empty()) std::copy(f.tactile.values().begin(), f.tactile.values().end(), tactile.mutable_data() + k * frame);
    std::copy(f.pose.begin(), f.pose.end(), pose.mutable_data() + k * 7);
    active.mutable_data()[k] = f.contact_active;
  }
  py::dict d;
  d["kind"] = to_string(rec.meta.kind);
  d["shape"] = rec.meta.shape;
  d["visual"] = visual;
  d["tactile"] = tactile;
  d["pose"] = pose;
  d["contact_active"] = active;
  d["condition"] = rec.condition;
  d["resting"] = rec.rest.resting;
  d["fell_off"] = rec.rest.fell_off;
  return d;
}

class PyModel {
 public:
  explicit PyModel(const std::string& dir) : ck_(load_checkpoint(dir)) {}

  std::size_t parameter_count() const { return ck_.state.model.parameter_count(); }
  std::string modalities() const { return modalities_to_string(ck_.state.model.config().modalities); }
  std::size_t image_side() const { return ck_.state.model.config().image_side; }

  // Each input is (batch, features) or None. Missing heads come back as None.
  py::dict predict(std::optional<DoubleArray> visual, std::optional<DoubleArray> tactile,
                   std::optional<DoubleArray> pose, std::optional<DoubleArray> condition) const {
    const MvaeModel& m = ck_.state.model;
    const ModelConfig& cfg = m.config();
    const std::array<std::optional<DoubleArray>*, kModalityCount> given{&visual, &tactile, &pose};
    Eigen::Index B = -1;
    Batch batch;
    ModalitySet avail = 0;
    for (std::size_t i = 0; i < kModalityCount; ++i) {
      const auto mod = static_cast<Modality>(i);
      const auto d = static_cast<Eigen::Index>(cfg.modality_dim(mod));
      if (!*given[i]) continue;
      const DoubleArray& a = **given[i];
      if (a.ndim() != 2 || a.shape(1) != d) throw InvalidInput(to_string(mod) + " must have shape (batch, " + std::to_string(d) + ")");
      if (B >= 0 && a.shape(0) != B) throw InvalidInput("inputs disagree on batch size");
      B = a.shape(0);
      batch.input[i] = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.data(), B, d).transpose();
      avail |= bit(mod);
    }
    if (B < 0) throw InvalidInput("predict needs at least one input modality");
    for (std::size_t i = 0; i < kModalityCount; ++i) {
      if (batch.input[i].size() == 0) batch.input[i] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.modality_dim(static_cast<Modality>(i))), B);
    }
    batch.available.assign(static_cast<std::size_t>(B), avail & cfg.modalities);
    batch.condition = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.condition_dim), B);
    if (condition) {
      const DoubleArray& c = *condition;
      if (c.ndim() != 2 || c.shape(0) != B || c.shape(1) != static_cast<Eigen::Index>(cfg.condition_dim)) {
        throw InvalidInput("condition must have shape (batch, " + std::to_string(cfg.condition_dim) + ")");
      }
      batch.condition = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(c.data(), B, c.shape(1)).transpose();
    } else if (cfg.condition_dim > 0) {
      throw InvalidInput("this model needs a condition vector");
    }
    const Prediction p = m.predict(batch, kAllModalities);
    py::dict out;
    const char* names[] = {"visual", "tactile", "pose"};
    for (std::size_t i = 0; i < kModalityCount; ++i) {
      if (!m.has_modality(static_cast<Modality>(i))) {
        out[names[i]] = py::none();
        continue;
      }
      const Eigen::MatrixXd v = p.value[i].transpose();
      py::array_t<double> a({v.rows(), v.cols()});
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.mutable_data(), v.rows(), v.cols()) = v;
      out[names[i]] = a;
    }
    return out;
  }

 private:
  Checkpoint ck_;
};

}  // namespace

PYBIND11_MODULE(_stsim, m) {
  m.doc() = "Visuotactile sensor simulator and multimodal VAE";
  m.attr("__version__") = kToolVersion;
  m.attr("DEFAULT_GEL_THICKNESS") = kDefaultGelThickness;
  m.attr("DEFAULT_SPRING_STIFFNESS") = kDefaultSpringStiffness;

  static py::exception<SaturationError> saturation(m, "SaturationError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const SaturationError& e) {
      py::object err = py::handle(saturation.ptr())(e.what());
      err.attr("max_supportable_load") = e.max_supportable_load;
      PyErr_SetObject(saturation.ptr(), err.ptr());
    }
  });

  m.def("clip_depth", [](const DoubleArray& raw, double pitch, double gel_thickness) {
    return from_grid(height_map(raw, pitch, gel_thickness).depth);
  }, py::arg("raw_depth"), py::arg("pitch"), py::arg("gel_thickness") = kDefaultGelThickness);

  m.def("normals", [](const DoubleArray& depth, double pitch, const std::string& method, int radius, double gel_thickness) {
    const NormalField nf = normals_of(height_map(depth, pitch, gel_thickness), method, radius);
    py::array_t<double> out({nf.height(), nf.width(), std::size_t{3}});
    double* p = out.mutable_data();
    for (const Eigen::Vector3d& n : nf.normals.values()) {
      *p++ = n.x();
      *p++ = n.y();
      *p++ = n.z();
    }
    return out;
  }, "Unit surface normals, shape (rows, cols, 3).", py::arg("depth"), py::arg("pitch"),
     py::arg("method") = "covariance", py::arg("radius") = kDefaultNormalRadius,
     py::arg("gel_thickness") = kDefaultGelThickness);

  m.def("render_tactile", [](const DoubleArray& depth, double pitch, const std::string& method, int radius,
                             double max_attenuation, double gel_thickness) {
    const HeightMap h = height_map(depth, pitch, gel_thickness);
    return from_image(render_tactile(h, normals_of(h, method, radius), default_phong(), DarkeningParams{max_attenuation}));
  }, "Tactile RGB image of a depth map with the default Phong rig.", py::arg("depth"), py::arg("pitch"),
     py::arg("method") = "covariance", py::arg("radius") = kDefaultNormalRadius, py::arg("max_attenuation") = 0.5,
     py::arg("gel_thickness") = kDefaultGelThickness);

  m.def("render_flat", [](std::size_t width, std::size_t height) {
    return from_image(render_flat(width, height, default_phong()));
  }, py::arg("width"), py::arg("height"));

  m.def("solve_equilibrium", [](const DoubleArray& clearance, double load, double stiffness, double gel_thickness) {
    SpringField k;
    k.stiffness = stiffness;
    k.gel_thickness = gel_thickness;
    const ContactSolution s = solve_equilibrium(to_grid(clearance), load, k);
    py::dict d;
    d["depth"] = from_grid(s.depth.depth);
    d["force"] = from_grid(s.force);
    d["contact"] = from_grid(s.contact);
    d["offset"] = s.offset;
    d["clipped_pixels"] = s.clipped_pixels;
    return d;
  }, "Per-pixel spring equilibrium under a normal load (use inf where the object is absent).",
     py::arg("clearance"), py::arg("load"), py::arg("stiffness") = kDefaultSpringStiffness,
     py::arg("gel_thickness") = kDefaultGelThickness);

  m.def("incline_outcome", [](double mu, double theta) {
    return incline_outcome(mu, theta) == InclineOutcome::kStick ? "stick" : "slide";
  }, py::arg("mu"), py::arg("theta"));

  m.def("poe_fuse", [](const std::vector<Eigen::VectorXd>& means, const std::vector<Eigen::VectorXd>& variances,
                       std::size_t latent_dim) {
    if (means.size() != variances.size()) throw InvalidInput("means and variances differ in length");
    std::vector<GaussianBelief> experts;
    for (std::size_t i = 0; i < means.size(); ++i) experts.push_back({means[i], variances[i]});
    const GaussianBelief f = poe_fuse(experts, latent_dim);
    return py::make_tuple(f.mean, f.var);
  }, "Product of the experts and a standard normal prior. Returns (mean, var).", py::arg("means"),
     py::arg("variances"), py::arg("latent_dim"));

  m.def("gaussian_kl", [](const Eigen::VectorXd& mean, const Eigen::VectorXd& var) {
    return gaussian_kl({mean, var});
  }, py::arg("mean"), py::arg("var"));

  m.def("bce_logits", [](const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets) {
    return bce_logits(logits, targets);
  }, py::arg("logits"), py::arg("targets"));

  m.def("simulate_episode", [](const std::string& kind, std::size_t index, std::size_t resolution,
                               std::optional<std::uint64_t> seed) {
    ScenarioConfig cfg = ScenarioConfig::defaults(scenario_kind_from_string(kind));
    cfg.sensor.resolution = resolution;
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return episode_dict(simulate_episode(cfg, index).record);
  }, "Simulate one seeded episode of the default scenario config.", py::arg("kind"), py::arg("index"),
     py::arg("resolution") = 64, py::arg("seed") = py::none());

  m.def("read_episode", [](const std::string& dir) { return episode_dict(read_episode(dir)); }, py::arg("path"));
  m.def("list_episodes", [](const std::string& root) { return list_episodes(root); }, py::arg("root"));

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint_dir"))
      .def_property_readonly("parameter_count", &PyModel::parameter_count)
      .def_property_readonly("modalities", &PyModel::modalities)
      .def_property_readonly("image_side", &PyModel::image_side)
      .def("predict", &PyModel::predict, py::arg("visual") = py::none(), py::arg("tactile") = py::none(),
           py::arg("pose") = py::none(), py::arg("condition") = py::none());
}
