#include "stsim/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "stsim/tactile_render.hpp"

namespace stsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Sample {
  std::size_t episode;
  std::size_t input;
  std::size_t target;
};

std::vector<Sample> final_samples(const std::vector<EpisodeTensors>& val_set, std::size_t stride = 0) {
  std::vector<Sample> out;
  for (std::size_t e = 0; e < val_set.size(); ++e) {
    const std::size_t last = val_set[e].frame_count() - 1;
    for (std::size_t t = 0; t <= last; ++t) out.push_back({e, t, stride ? std::min(t + stride, last) : last});
  }
  return out;
}

double column_bce(const MatrixXd& logits, const MatrixXd& targets) { return bce_logits(logits, targets); }

}  // namespace

VectorXd flat_tactile(std::size_t side) {
  const TactileImage flat = render_flat(side, side, default_phong());
  VectorXd v(static_cast<Eigen::Index>(flat.values().size()));
  for (std::size_t i = 0; i < flat.values().size(); ++i) v[static_cast<Eigen::Index>(i)] = flat.values()[i];
  return v;
}

bool tactile_has_contact(const VectorXd& tactile, const VectorXd& flat, double threshold) {
  if (tactile.size() != flat.size()) throw InvalidInput("tactile frame and flat reference differ in size");
  return (tactile - flat).cwiseAbs().maxCoeff() > threshold;
}

EvalScores evaluate(const MvaeModel& model, const std::vector<EpisodeTensors>& val_set, Protocol protocol,
                    std::size_t k, ModalitySet use) {
  if (val_set.empty()) throw InvalidInput("evaluation needs a non-empty validation set");
  if (protocol != Protocol::kFinalStep && k == 0) throw InvalidInput("rollout stride must be >= 1");
  const ModelConfig& cfg = model.config();
  const std::vector<Sample> samples = final_samples(val_set, protocol == Protocol::kStride ? k : 0);
  const auto B = static_cast<Eigen::Index>(samples.size());

  // Working inputs, initialised from the observed frames.
  Batch batch;
  std::array<MatrixXd, kModalityCount> targets;
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    const auto m = static_cast<Modality>(i);
    if (!model.has_modality(m)) continue;
    const auto d = static_cast<Eigen::Index>(cfg.modality_dim(m));
    batch.input[i] = MatrixXd(d, B);
    targets[i] = MatrixXd(d, B);
  }
  batch.condition = MatrixXd(static_cast<Eigen::Index>(cfg.condition_dim), B);
  batch.available.resize(samples.size());
  std::vector<std::size_t> remaining(samples.size(), 1);
  for (Eigen::Index j = 0; j < B; ++j) {
    const Sample& s = samples[static_cast<std::size_t>(j)];
    const EpisodeTensors& ep = val_set[s.episode];
    for (std::size_t i = 0; i < kModalityCount; ++i) {
      if (!model.has_modality(static_cast<Modality>(i))) continue;
      if (ep.frames[i].rows() != batch.input[i].rows()) throw InvalidInput("episode resolution does not match the model");
      batch.input[i].col(j) = ep.frames[i].col(static_cast<Eigen::Index>(s.input));
      targets[i].col(j) = ep.frames[i].col(static_cast<Eigen::Index>(s.target));
    }
    if (cfg.condition_dim > 0) batch.condition.col(j) = ep.condition;
    ModalitySet a = bit(Modality::kVisual) | bit(Modality::kPose);
    if (ep.contact_active[s.input]) a |= bit(Modality::kTactile);
    batch.available[static_cast<std::size_t>(j)] = a & use & cfg.modalities;
    if (protocol == Protocol::kRollout) {
      remaining[static_cast<std::size_t>(j)] = std::max<std::size_t>(1, (s.target - s.input + k - 1) / k);
    }
  }

  EvalScores scores;
  scores.pairs = samples.size();
  for (ModalitySet a : batch.available) scores.prior_only += a == 0;

  std::array<MatrixXd, kModalityCount> final_logits;
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    if (model.has_modality(static_cast<Modality>(i))) final_logits[i] = MatrixXd(batch.input[i].rows(), B);
  }
  const VectorXd flat = model.has_modality(Modality::kTactile) ? flat_tactile(cfg.image_side) : VectorXd();

  for (bool active = true; active;) {
    const Prediction pred = model.predict(batch, use);
    active = false;
    for (Eigen::Index j = 0; j < B; ++j) {
      std::size_t& left = remaining[static_cast<std::size_t>(j)];
      if (left == 0) continue;
      --left;
      if (left == 0) {
        for (std::size_t i = 0; i < kModalityCount; ++i) {
          if (model.has_modality(static_cast<Modality>(i))) final_logits[i].col(j) = pred.logits[i].col(j);
        }
        continue;
      }
      active = true;
      ModalitySet a = batch.available[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < kModalityCount; ++i) {
        const auto m = static_cast<Modality>(i);
        if (!model.has_modality(m)) continue;
        batch.input[i].col(j) = pred.value[i].col(j);
        if (m == Modality::kTactile) {
          a = tactile_has_contact(pred.value[i].col(j), flat) ? (a | bit(m)) : (a & ~bit(m));
        } else {
          a |= bit(m);
        }
      }
      batch.available[static_cast<std::size_t>(j)] = a & use & cfg.modalities;
    }
  }

  if (model.has_modality(Modality::kVisual)) scores.visual_bce = column_bce(final_logits[0], targets[0]);
  if (model.has_modality(Modality::kTactile)) scores.tactile_bce = column_bce(final_logits[1], targets[1]);
  if (model.has_modality(Modality::kPose)) {
    scores.pose_mse = (final_logits[2] - targets[2]).squaredNorm() / static_cast<double>(targets[2].size());
  }
  return scores;
}

double mean_image_bce(const std::vector<EpisodeTensors>& train_set, const std::vector<EpisodeTensors>& val_set,
                      Modality m) {
  if (m == Modality::kPose) throw InvalidInput("mean_image_bce applies to image modalities");
  if (train_set.empty() || val_set.empty()) throw InvalidInput("mean_image_bce needs train and validation episodes");
  const auto i = static_cast<std::size_t>(m);
  VectorXd mean = VectorXd::Zero(train_set.front().frames[i].rows());
  for (const EpisodeTensors& ep : train_set) mean += ep.frames[i].col(ep.frames[i].cols() - 1);
  mean /= static_cast<double>(train_set.size());
  // Logit of the mean, clamped away from 0/1 so the baseline stays finite.
  const VectorXd logit = mean.unaryExpr([](double p) {
    const double q = std::clamp(p, 1e-6, 1.0 - 1e-6);
    return std::log(q / (1.0 - q));
  });
  const std::vector<Sample> samples = final_samples(val_set);
  MatrixXd logits(logit.size(), static_cast<Eigen::Index>(samples.size()));
  MatrixXd targets(logit.size(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const EpisodeTensors& ep = val_set[samples[j].episode];
    logits.col(static_cast<Eigen::Index>(j)) = logit;
    targets.col(static_cast<Eigen::Index>(j)) = ep.frames[i].col(static_cast<Eigen::Index>(samples[j].target));
  }
  return bce_logits(logits, targets);
}

std::vector<TableRow> table_rows() {
  std::vector<TableRow> rows(4);
  rows[0].model = "VAE-visual only";
  rows[0].modalities = bit(Modality::kVisual);
  rows[1].model = "VAE-tactile only";
  rows[1].modalities = bit(Modality::kTactile);
  rows[2].model = "MVAE w/ pose";
  rows[2].modalities = kAllModalities;
  rows[3].model = "MVAE w/o pose";
  rows[3].modalities = bit(Modality::kVisual) | bit(Modality::kTactile);
  return rows;
}

namespace {

std::string cell(const std::optional<double>& v, double scale, const char* fmt) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, *v * scale);
  return buf;
}

}  // namespace

std::string MetricsTable::csv() const {
  std::ostringstream os;
  os << "scenario,model,visual_multi_step,visual_final_step,tactile_multi_step,tactile_final_step\n";
  for (const TableRow& r : rows) {
    os << scenario << ',' << r.model << ',' << cell(r.visual_multi, 1.0, "%.9g") << ','
       << cell(r.visual_final, 1.0, "%.9g") << ',' << cell(r.tactile_multi, 1.0, "%.9g") << ','
       << cell(r.tactile_final, 1.0, "%.9g") << '\n';
  }
  return os.str();
}

std::string MetricsTable::text() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %-18s %12s %12s %12s %12s\n", "task", "model", "visual", "visual",
                "tactile", "tactile");
  os << line;
  std::snprintf(line, sizeof line, "%-10s %-18s %12s %12s %12s %12s\n", "", "(BCE x1e-4)", "multi", "final", "multi",
                "final");
  os << line;
  for (const TableRow& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %-18s %12s %12s %12s %12s\n", scenario.c_str(), r.model.c_str(),
                  cell(r.visual_multi, 1e4, "%.0f").c_str(), cell(r.visual_final, 1e4, "%.0f").c_str(),
                  cell(r.tactile_multi, 1e4, "%.0f").c_str(), cell(r.tactile_final, 1e4, "%.0f").c_str());
    os << line;
  }
  return os.str();
}

namespace {

void blit(RgbImage& dst, const VectorXd& src, std::size_t side, std::size_t scale, std::size_t x0) {
  for (std::size_t y = 0; y < side * scale; ++y) {
    for (std::size_t x = 0; x < side * scale; ++x) {
      const std::size_t base = ((y / scale) * side + x / scale) * 3;
      for (std::size_t c = 0; c < 3; ++c) {
        dst.at(x0 + x, y, c) = static_cast<float>(std::clamp(src[static_cast<Eigen::Index>(base + c)], 0.0, 1.0));
      }
    }
  }
}

void draw_line(RgbImage& img, double x0, double y0, double x1, double y1, const Rgb& color, bool dashed,
               std::size_t clip_x0, std::size_t clip_x1) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int n = std::max(1, static_cast<int>(std::ceil(len)));
  for (int i = 0; i <= n; ++i) {
    if (dashed && (i / 4) % 2 == 1) continue;
    const double t = static_cast<double>(i) / n;
    const long x = std::lround(x0 + t * (x1 - x0));
    const long y = std::lround(y0 + t * (y1 - y0));
    if (x < static_cast<long>(clip_x0) || x >= static_cast<long>(clip_x1) || y < 0 ||
        y >= static_cast<long>(img.height())) {
      continue;
    }
    img.set_pixel(static_cast<std::size_t>(x), static_cast<std::size_t>(y), static_cast<float>(color[0]),
                  static_cast<float>(color[1]), static_cast<float>(color[2]));
  }
}

// Projected body x (red) and y (green) axes, anchored at the pose position.
void draw_axes(RgbImage& img, const VectorXd& pose, std::size_t panel_x0, std::size_t panel, bool dashed) {
  if (pose.size() != static_cast<Eigen::Index>(kPoseDim) || !pose.allFinite()) return;
  Eigen::Quaterniond q(pose[3], pose[4], pose[5], pose[6]);
  if (q.norm() < 1e-9) return;
  q.normalize();
  const Eigen::Matrix3d r = q.toRotationMatrix();
  const double cx = panel_x0 + (pose[0] + 1.0) * 0.5 * panel;
  const double cy = (pose[1] + 1.0) * 0.5 * panel;
  const double arm = 0.2 * panel;
  const Rgb colors[2] = {{1.0, 0.2, 0.2}, {0.2, 1.0, 0.2}};
  for (int a = 0; a < 2; ++a) {
    draw_line(img, cx, cy, cx + arm * r(0, a), cy + arm * r(1, a), colors[a], dashed, panel_x0, panel_x0 + panel);
  }
}

}  // namespace

RgbImage prediction_strip(const MvaeModel& model, const EpisodeTensors& ep, std::size_t input_frame,
                          std::size_t scale) {
  if (input_frame >= ep.frame_count()) throw InvalidInput("strip input frame is out of range");
  if (scale == 0) throw InvalidInput("strip scale must be >= 1");
  const ModelConfig& cfg = model.config();
  const std::size_t side = cfg.image_side;
  const std::size_t panel = side * scale;
  const std::size_t last = ep.frame_count() - 1;

  std::vector<EpisodeTensors> one{ep};
  std::vector<PairRef> pair(1);
  pair[0].pair.input = input_frame;
  pair[0].pair.target = last;
  pair[0].pair.tactile = ep.contact_active[input_frame];
  const Batch batch = make_batch(one, pair, cfg);
  const Prediction pred = model.predict(batch, kAllModalities);

  RgbImage strip(panel * 6, panel);
  const VectorXd blank = VectorXd::Zero(static_cast<Eigen::Index>(side * side * 3));
  auto frame = [&](std::size_t i, std::size_t k) -> VectorXd {
    return ep.frames[i].rows() == blank.size() ? VectorXd(ep.frames[i].col(static_cast<Eigen::Index>(k))) : blank;
  };
  auto predicted = [&](std::size_t i) -> VectorXd {
    return model.has_modality(static_cast<Modality>(i)) ? VectorXd(pred.value[i].col(0)) : blank;
  };
  blit(strip, frame(0, input_frame), side, scale, 0);
  blit(strip, frame(1, input_frame), side, scale, panel);
  blit(strip, predicted(0), side, scale, 2 * panel);
  blit(strip, predicted(1), side, scale, 3 * panel);
  blit(strip, frame(0, last), side, scale, 4 * panel);
  blit(strip, frame(1, last), side, scale, 5 * panel);

  const VectorXd truth = ep.frames[2].col(static_cast<Eigen::Index>(last));
  if (model.has_modality(Modality::kPose)) draw_axes(strip, pred.value[2].col(0), 2 * panel, panel, false);
  draw_axes(strip, truth, 2 * panel, panel, true);
  draw_axes(strip, truth, 4 * panel, panel, true);
  return strip;
}

}  // namespace stsim
