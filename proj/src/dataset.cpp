#include "stsim/dataset.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "stsim/image_io.hpp"
#include "stsim/tensor_io.hpp"

namespace fs = std::filesystem;

namespace stsim {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

template <typename Seq, typename Fmt>
std::string join(const Seq& values, Fmt fmt) {
  std::string s;
  for (const auto& v : values) {
    if (!s.empty()) s += ',';
    s += fmt(v);
  }
  return s;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  return parts;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& p : split_commas(s)) out.push_back(std::stod(p));
  return out;
}

std::vector<float> parse_floats(const std::string& s) {
  std::vector<float> out;
  for (const auto& p : split_commas(s)) out.push_back(std::strtof(p.c_str(), nullptr));
  return out;
}

template <std::size_t N>
std::array<double, N> fixed_doubles(const std::string& s, const char* key) {
  const auto v = parse_doubles(s);
  if (v.size() != N) throw InvalidInput(std::string("meta key '") + key + "' has the wrong arity");
  std::array<double, N> a{};
  std::copy(v.begin(), v.end(), a.begin());
  return a;
}

PoseVector parse_pose(const std::string& s) {
  const auto v = parse_floats(s);
  if (v.size() != 7) throw InvalidInput("meta key 'final_pose' must have 7 components");
  PoseVector p{};
  std::copy(v.begin(), v.end(), p.begin());
  return p;
}

std::string rest_label(const RestState& r) {
  if (r.resting) return "resting";
  if (r.fell_off) return "fell_off";
  return "unresolved";
}

void write_meta(const EpisodeRecord& rec, const fs::path& path) {
  const EpisodeMeta& m = rec.meta;
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << '\n'; };
  kv("scenario", to_string(m.kind));
  kv("seed", std::to_string(m.seed));
  kv("gravity", fmt_double(m.gravity));
  kv("incline_angle", fmt_double(m.incline_angle));
  kv("perturb_magnitude", fmt_double(m.perturb_magnitude));
  kv("perturb_direction", fmt_double(m.perturb_direction));
  if (!rec.condition.empty()) kv("condition", join(rec.condition, fmt_float));
  kv("shape", m.shape);
  kv("shape_dims", join(m.shape_dims, fmt_double));
  kv("mass", fmt_double(m.mass));
  kv("friction", fmt_double(m.friction));
  kv("restitution", fmt_double(m.restitution));
  kv("color", join(m.color, fmt_double));
  kv("sensor_half_size", fmt_double(m.sensor_half_size));
  kv("resolution", std::to_string(m.resolution));
  kv("dt", fmt_double(m.dt));
  kv("capture_stride", std::to_string(m.capture_stride));
  kv("frames", std::to_string(rec.frames.size()));
  kv("rest", rest_label(rec.rest));
  kv("frames_to_rest", std::to_string(rec.rest.frames_to_rest));
  kv("final_pose", join(rec.rest.final_pose, fmt_float));
}

template <typename Fn>
TensorF32 stack_images(const std::vector<Frame>& frames, Fn get) {
  const RgbImage& first = get(frames.front());
  TensorF32 t;
  t.dims = {frames.size(), first.height(), first.width(), 3};
  t.data.reserve(t.element_count());
  for (const Frame& f : frames) {
    const auto& v = get(f).values();
    t.data.insert(t.data.end(), v.begin(), v.end());
  }
  return t;
}

template <typename Fn>
TensorF32 stack_masks(const std::vector<Frame>& frames, Fn get) {
  const Mask& first = get(frames.front());
  TensorF32 t;
  t.dims = {frames.size(), first.height(), first.width()};
  t.data.reserve(t.element_count());
  for (const Frame& f : frames) {
    for (unsigned char v : get(f).values()) t.data.push_back(v ? 1.0f : 0.0f);
  }
  return t;
}

enum Block { kVisual, kTactile, kPose, kContact, kActive, kVisualMask, kStep, kBlockCount };

std::string frame_name(std::size_t k, const char* what) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "frame_%04zu_%s.png", k, what);
  return buf;
}

}  // namespace

std::string episode_id(std::size_t index) {
  std::string s = std::to_string(index);
  if (s.size() < kEpisodeIdWidth) s.insert(0, kEpisodeIdWidth - s.size(), '0');
  return s;
}

std::vector<std::string> list_episodes(const fs::path& root) {
  std::vector<std::string> ids;
  if (!fs::is_directory(root)) return ids;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (!name.empty() && std::all_of(name.begin(), name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      ids.push_back(name);
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string write_episode(const EpisodeRecord& rec, const fs::path& root) {
  std::size_t next = 0;
  for (const auto& id : list_episodes(root)) next = std::max<std::size_t>(next, std::stoull(id) + 1);
  return write_episode(rec, root, next);
}

std::string write_episode(const EpisodeRecord& rec, const fs::path& root, std::size_t index) {
  rec.validate();
  fs::create_directories(root);
  const std::string id = episode_id(index);
  const fs::path dir = root / id;
  if (!fs::create_directory(dir)) throw InvalidInput("episode " + id + " already exists under " + root.string());

  write_meta(rec, dir / "meta");
  for (std::size_t k = 0; k < rec.frames.size(); ++k) {
    write_png(dir / frame_name(k, "visual"), rec.frames[k].visual);
    write_png(dir / frame_name(k, "tactile"), rec.frames[k].tactile);
  }

  std::vector<TensorF32> blocks(kBlockCount);
  blocks[kVisual] = stack_images(rec.frames, [](const Frame& f) -> const RgbImage& { return f.visual; });
  blocks[kTactile] = stack_images(rec.frames, [](const Frame& f) -> const RgbImage& { return f.tactile; });
  blocks[kPose].dims = {rec.frames.size(), 7};
  for (const Frame& f : rec.frames) blocks[kPose].data.insert(blocks[kPose].data.end(), f.pose.begin(), f.pose.end());
  blocks[kContact] = stack_masks(rec.frames, [](const Frame& f) -> const Mask& { return f.contact; });
  blocks[kActive].dims = {rec.frames.size()};
  blocks[kStep].dims = {rec.frames.size()};
  for (const Frame& f : rec.frames) {
    blocks[kActive].data.push_back(f.contact_active ? 1.0f : 0.0f);
    blocks[kStep].data.push_back(static_cast<float>(f.step));
  }
  blocks[kVisualMask] = stack_masks(rec.frames, [](const Frame& f) -> const Mask& { return f.visual_mask; });
  save_tensors(dir / "frames.tns", blocks);
  return id;
}

EpisodeRecord read_episode(const fs::path& dir) {
  namespace pt = boost::property_tree;
  pt::ptree meta;
  try {
    pt::read_ini((dir / "meta").string(), meta);
  } catch (const pt::ptree_error& e) {
    throw InvalidInput("cannot read episode meta in " + dir.string() + ": " + e.what());
  }
  auto get = [&](const char* key) {
    auto v = meta.get_optional<std::string>(key);
    if (!v) throw InvalidInput(std::string("episode meta is missing '") + key + "'");
    return *v;
  };

  EpisodeRecord rec;
  EpisodeMeta& m = rec.meta;
  m.kind = scenario_kind_from_string(get("scenario"));
  m.seed = std::stoull(get("seed"));
  m.gravity = std::stod(get("gravity"));
  m.incline_angle = std::stod(get("incline_angle"));
  m.perturb_magnitude = std::stod(get("perturb_magnitude"));
  m.perturb_direction = std::stod(get("perturb_direction"));
  if (auto c = meta.get_optional<std::string>("condition")) rec.condition = parse_floats(*c);
  m.shape = get("shape");
  m.shape_dims = fixed_doubles<3>(get("shape_dims"), "shape_dims");
  m.mass = std::stod(get("mass"));
  m.friction = std::stod(get("friction"));
  m.restitution = std::stod(get("restitution"));
  m.color = fixed_doubles<3>(get("color"), "color");
  m.sensor_half_size = std::stod(get("sensor_half_size"));
  m.resolution = static_cast<std::uint32_t>(std::stoul(get("resolution")));
  m.dt = std::stod(get("dt"));
  m.capture_stride = static_cast<std::uint32_t>(std::stoul(get("capture_stride")));
  const std::string rest = get("rest");
  rec.rest.resting = rest == "resting";
  rec.rest.fell_off = rest == "fell_off";
  rec.rest.unresolved = rest == "unresolved";
  if (!rec.rest.resting && !rec.rest.fell_off && !rec.rest.unresolved) {
    throw InvalidInput("unknown rest label '" + rest + "'");
  }
  rec.rest.frames_to_rest = static_cast<std::uint32_t>(std::stoul(get("frames_to_rest")));
  rec.rest.final_pose = parse_pose(get("final_pose"));

  const auto blocks = load_tensors<float>(dir / "frames.tns");
  if (blocks.size() != kBlockCount) throw InvalidInput("frames.tns in " + dir.string() + " has the wrong block count");
  const std::size_t n = std::stoull(get("frames"));
  const auto& vis = blocks[kVisual];
  if (vis.dims.size() != 4 || vis.dims[0] != n) throw InvalidInput("frames.tns visual block has unexpected shape");
  const std::size_t h = vis.dims[1];
  const std::size_t w = vis.dims[2];
  const std::size_t img = w * h * 3;
  const std::size_t px = w * h;
  auto check = [&](Block b, std::size_t per_frame) {
    if (blocks[b].data.size() != n * per_frame) throw InvalidInput("frames.tns block has inconsistent size");
  };
  check(kTactile, img);
  check(kPose, 7);
  check(kContact, px);
  check(kActive, 1);
  check(kVisualMask, px);
  check(kStep, 1);

  rec.frames.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    Frame& f = rec.frames[k];
    f.visual = RgbImage(w, h);
    f.tactile = RgbImage(w, h);
    std::copy_n(vis.data.begin() + static_cast<std::ptrdiff_t>(k * img), img, f.visual.values().begin());
    std::copy_n(blocks[kTactile].data.begin() + static_cast<std::ptrdiff_t>(k * img), img, f.tactile.values().begin());
    std::copy_n(blocks[kPose].data.begin() + static_cast<std::ptrdiff_t>(k * 7), 7, f.pose.begin());
    f.contact = Mask(w, h);
    f.visual_mask = Mask(w, h);
    for (std::size_t i = 0; i < px; ++i) {
      f.contact[i] = blocks[kContact].data[k * px + i] != 0.0f;
      f.visual_mask[i] = blocks[kVisualMask].data[k * px + i] != 0.0f;
    }
    f.contact_active = blocks[kActive].data[k] != 0.0f;
    f.step = static_cast<std::uint32_t>(blocks[kStep].data[k]);
  }
  rec.validate();
  return rec;
}

Split split(const std::vector<std::string>& ids, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidInput("split fraction must lie in (0, 1)");
  if (ids.size() < 2) throw InvalidInput("split needs at least two ids");
  std::vector<std::string> order = ids;
  std::mt19937_64 rng(seed);
  // Explicit Fisher-Yates so the permutation does not depend on the standard
  // library's distribution implementation.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(order.size())));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

RgbImage downsample(const RgbImage& img, std::size_t tw, std::size_t th) {
  if (tw == 0 || th == 0 || img.width() % tw != 0 || img.height() % th != 0) {
    throw InvalidInput("downsample: " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                       " is not divisible into " + std::to_string(tw) + "x" + std::to_string(th));
  }
  const std::size_t fx = img.width() / tw;
  const std::size_t fy = img.height() / th;
  const double inv = 1.0 / static_cast<double>(fx * fy);
  RgbImage out(tw, th);
  for (std::size_t y = 0; y < th; ++y) {
    for (std::size_t x = 0; x < tw; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (std::size_t j = 0; j < fy; ++j) {
          for (std::size_t i = 0; i < fx; ++i) sum += img.at(x * fx + i, y * fy + j, c);
        }
        out.at(x, y, c) = static_cast<float>(std::clamp(sum * inv, 0.0, 1.0));
      }
    }
  }
  return out;
}

bool mask_box(const Mask& mask, std::size_t pad, PixelBox& box) {
  bool any = false;
  PixelBox b{mask.width(), mask.height(), 0, 0};
  for (std::size_t y = 0; y < mask.height(); ++y) {
    for (std::size_t x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      any = true;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (!any) return false;
  b.x0 = b.x0 > pad ? b.x0 - pad : 0;
  b.y0 = b.y0 > pad ? b.y0 - pad : 0;
  b.x1 = std::min(b.x1 + pad, mask.width() - 1);
  b.y1 = std::min(b.y1 + pad, mask.height() - 1);
  box = b;
  return true;
}

RgbImage crop_to_mask(const RgbImage& img, const Mask& mask, std::size_t pad) {
  if (!mask.same_shape(img.width(), img.height())) throw InvalidInput("crop_to_mask: mask and image sizes differ");
  PixelBox box;
  if (!mask_box(mask, pad, box)) return img;
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  RgbImage out(w, h);
  const double sx = static_cast<double>(box.width()) / static_cast<double>(w);
  const double sy = static_cast<double>(box.height()) / static_cast<double>(h);
  for (std::size_t y = 0; y < h; ++y) {
    const double v = std::clamp(box.y0 + (y + 0.5) * sy - 0.5, double(box.y0), double(box.y1));
    const auto y0 = static_cast<std::size_t>(v);
    const std::size_t y1 = std::min(y0 + 1, box.y1);
    const double fy = v - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double u = std::clamp(box.x0 + (x + 0.5) * sx - 0.5, double(box.x0), double(box.x1));
      const auto x0 = static_cast<std::size_t>(u);
      const std::size_t x1 = std::min(x0 + 1, box.x1);
      const double fx = u - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        const double bot = (1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out.at(x, y, c) = static_cast<float>((1 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

std::vector<TrainingPair> make_pairs(const EpisodeRecord& rec, PairMode mode) {
  rec.validate();
  if (mode.kind == PairKind::kFixedStep && mode.k == 0) throw InvalidInput("fixed-step stride must be >= 1");
  const std::size_t last = rec.frames.size() - 1;
  std::vector<TrainingPair> pairs;
  pairs.reserve(rec.frames.size());
  for (std::size_t t = 0; t <= last; ++t) {
    TrainingPair p;
    p.input = t;
    p.target = mode.kind == PairKind::kFinalStep ? last : std::min(t + mode.k, last);
    p.tactile = rec.frames[t].contact_active;
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace stsim
