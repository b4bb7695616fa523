#include "stsim/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "stsim/config.hpp"
#include "stsim/tensor_io.hpp"

namespace fs = std::filesystem;

namespace stsim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (!(anneal_epochs >= 1.0)) throw InvalidInput("anneal_epochs must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidInput("train_fraction must lie in (0, 1)");
  if (mode.kind == PairKind::kFixedStep && mode.k == 0) throw InvalidInput("fixed-step stride must be >= 1");
  model_config(conditioned ? 3 : 0).validate();
}

ModelConfig TrainConfig::model_config(std::size_t condition_dim) const {
  ModelConfig m;
  m.modalities = modalities;
  m.image_side = image_side;
  m.latent_dim = latent_dim;
  m.hidden = hidden;
  m.condition_dim = conditioned ? condition_dim : 0;
  m.lambda = lambda;
  m.seed = seed;
  return m;
}

namespace {

void put_image(const RgbImage& img, MatrixXd& dst, Eigen::Index col) {
  const auto& v = img.values();
  for (std::size_t i = 0; i < v.size(); ++i) dst(static_cast<Eigen::Index>(i), col) = v[i];
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

EpisodeTensors prepare_episode(const EpisodeRecord& rec, std::size_t side, bool crop, std::size_t crop_pad,
                               const std::string& id) {
  rec.validate();
  EpisodeTensors e;
  e.id = id;
  e.kind = rec.meta.kind;
  e.fell_off = rec.rest.fell_off;
  const auto F = static_cast<Eigen::Index>(rec.frames.size());
  const auto D = static_cast<Eigen::Index>(side * side * 3);
  e.frames[0] = MatrixXd(D, F);
  e.frames[1] = MatrixXd(D, F);
  e.frames[2] = MatrixXd(static_cast<Eigen::Index>(kPoseDim), F);
  const double half = rec.meta.sensor_half_size > 0.0 ? rec.meta.sensor_half_size : 1.0;
  for (Eigen::Index k = 0; k < F; ++k) {
    const Frame& f = rec.frames[static_cast<std::size_t>(k)];
    RgbImage vis = crop ? crop_to_mask(f.visual, f.visual_mask, crop_pad) : f.visual;
    RgbImage tac = crop ? crop_to_mask(f.tactile, f.contact, crop_pad) : f.tactile;
    put_image(downsample(vis, side), e.frames[0], k);
    put_image(downsample(tac, side), e.frames[1], k);
    for (std::size_t i = 0; i < kPoseDim; ++i) {
      const double v = f.pose[i];
      e.frames[2](static_cast<Eigen::Index>(i), k) = i < 3 ? v / half : v;
    }
    e.contact_active.push_back(f.contact_active);
  }
  e.condition = VectorXd(static_cast<Eigen::Index>(rec.condition.size()));
  for (std::size_t i = 0; i < rec.condition.size(); ++i) e.condition[static_cast<Eigen::Index>(i)] = rec.condition[i];
  return e;
}

std::vector<EpisodeTensors> load_prepared(const fs::path& root, const std::vector<std::string>& ids,
                                          const TrainConfig& cfg) {
  std::vector<EpisodeTensors> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    out.push_back(prepare_episode(read_episode(root / id), cfg.image_side, cfg.crop, cfg.crop_pad, id));
  }
  return out;
}

std::vector<PairRef> collect_pairs(const std::vector<EpisodeTensors>& episodes, PairMode mode) {
  std::vector<PairRef> refs;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const EpisodeTensors& ep = episodes[e];
    if (ep.frame_count() < 2) throw InvalidInput("episode " + ep.id + " has fewer than two frames");
    const std::size_t last = ep.frame_count() - 1;
    for (std::size_t t = 0; t <= last; ++t) {
      TrainingPair p;
      p.input = t;
      p.target = mode.kind == PairKind::kFinalStep ? last : std::min(t + mode.k, last);
      p.tactile = ep.contact_active[t];
      refs.push_back({e, p});
    }
  }
  return refs;
}

Batch make_batch(const std::vector<EpisodeTensors>& episodes, const std::vector<PairRef>& pairs,
                 const ModelConfig& cfg, ModalitySet use) {
  Batch b;
  const auto B = static_cast<Eigen::Index>(pairs.size());
  for (std::size_t i = 0; i < kModalityCount; ++i) {
    const auto m = static_cast<Modality>(i);
    if (!has(cfg.modalities, m)) continue;
    const auto d = static_cast<Eigen::Index>(cfg.modality_dim(m));
    b.input[i] = MatrixXd(d, B);
    b.target[i] = MatrixXd(d, B);
  }
  b.condition = MatrixXd(static_cast<Eigen::Index>(cfg.condition_dim), B);
  b.available.resize(pairs.size());
  for (Eigen::Index j = 0; j < B; ++j) {
    const PairRef& r = pairs[static_cast<std::size_t>(j)];
    const EpisodeTensors& ep = episodes[r.episode];
    for (std::size_t i = 0; i < kModalityCount; ++i) {
      if (!has(cfg.modalities, static_cast<Modality>(i))) continue;
      if (ep.frames[i].rows() != b.input[i].rows()) throw InvalidInput("episode resolution does not match the model");
      b.input[i].col(j) = ep.frames[i].col(static_cast<Eigen::Index>(r.pair.input));
      b.target[i].col(j) = ep.frames[i].col(static_cast<Eigen::Index>(r.pair.target));
    }
    if (cfg.condition_dim > 0) {
      if (static_cast<std::size_t>(ep.condition.size()) != cfg.condition_dim) {
        throw InvalidInput("episode " + ep.id + " lacks the condition vector the model expects");
      }
      b.condition.col(j) = ep.condition;
    }
    ModalitySet a = 0;
    if (r.pair.visual) a |= bit(Modality::kVisual);
    if (r.pair.tactile) a |= bit(Modality::kTactile);
    if (r.pair.pose) a |= bit(Modality::kPose);
    b.available[static_cast<std::size_t>(j)] = a & use & cfg.modalities;
  }
  return b;
}

TrainState initial_state(const TrainConfig& cfg, std::size_t condition_dim) {
  cfg.validate();
  TrainState s;
  s.model = MvaeModel(cfg.model_config(condition_dim));
  return s;
}

EpochStats validate_model(const MvaeModel& model, const std::vector<EpisodeTensors>& val_set, PairMode mode,
                          double beta) {
  EpochStats st;
  st.beta = beta;
  const std::vector<PairRef> pairs = collect_pairs(val_set, mode);
  if (pairs.empty()) throw InvalidInput("validation set is empty");
  const ModelConfig& cfg = model.config();
  const Batch batch = make_batch(val_set, pairs, cfg);
  const MatrixXd zero = MatrixXd::Zero(static_cast<Eigen::Index>(cfg.latent_dim), batch.size());
  st.val_loss = model.subset_loss(batch, beta, zero, nullptr).total;
  const Prediction pred = model.predict(batch, kAllModalities);
  st.val_visual_bce = model.has_modality(Modality::kVisual) ? bce_logits(pred.logits[0], batch.target[0]) : kNaN;
  st.val_tactile_bce = model.has_modality(Modality::kTactile) ? bce_logits(pred.logits[1], batch.target[1]) : kNaN;
  st.val_pose_mse = model.has_modality(Modality::kPose)
                        ? (pred.value[2] - batch.target[2]).squaredNorm() / static_cast<double>(batch.target[2].size())
                        : kNaN;
  return st;
}

std::vector<EpochStats> train(TrainState& state, const std::vector<EpisodeTensors>& train_set,
                              const std::vector<EpisodeTensors>& val_set, const TrainConfig& cfg) {
  cfg.validate();
  const std::vector<PairRef> pairs = collect_pairs(train_set, cfg.mode);
  if (pairs.empty()) throw InvalidInput("training split is empty");
  const ModelConfig& mc = state.model.config();
  AdamParams adam;
  adam.lr = cfg.learning_rate;
  std::vector<EpochStats> curve;
  VectorXd grad = VectorXd::Zero(state.model.parameters().size());

  for (std::size_t round = 0; round < cfg.epochs; ++round) {
    const std::size_t epoch = state.epochs_done;
    const double beta = beta_schedule(static_cast<double>(epoch), cfg.anneal_epochs);
    Rng rng(mix_seed(cfg.seed, epoch));
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      std::vector<PairRef> chunk;
      chunk.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) chunk.push_back(pairs[order[i]]);
      const Batch batch = make_batch(train_set, chunk, mc);
      const MatrixXd noise = sample_noise(rng, mc.latent_dim, batch.size());
      grad.setZero();
      LossBreakdown l;
      try {
        l = state.model.subset_loss(batch, beta, noise, &grad);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches) + ": " +
                             e.what());
      }
      if (!adam_step(state.model.parameters(), grad, state.adam, adam)) {
        throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batches));
      }
      loss_sum += l.total;
      ++batches;
    }

    EpochStats st = val_set.empty() ? EpochStats{} : validate_model(state.model, val_set, cfg.mode, beta);
    if (val_set.empty()) st.val_loss = st.val_visual_bce = st.val_tactile_bce = st.val_pose_mse = kNaN;
    st.epoch = epoch + 1;
    st.beta = beta;
    st.train_loss = loss_sum / static_cast<double>(batches);
    curve.push_back(st);
    state.epochs_done += 1;
  }
  return curve;
}

Manifest train_manifest(const TrainConfig& cfg) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string hidden;
  for (std::size_t w : cfg.hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(w);
  Manifest m;
  m["epochs"] = std::to_string(cfg.epochs);
  m["batch_size"] = std::to_string(cfg.batch_size);
  m["learning_rate"] = num(cfg.learning_rate);
  m["anneal_epochs"] = num(cfg.anneal_epochs);
  m["lambda_visual"] = num(cfg.lambda[0]);
  m["lambda_tactile"] = num(cfg.lambda[1]);
  m["lambda_pose"] = num(cfg.lambda[2]);
  m["seed"] = std::to_string(cfg.seed);
  m["latent_dim"] = std::to_string(cfg.latent_dim);
  m["hidden"] = hidden;
  m["mode"] = to_string(cfg.mode);
  m["conditioned"] = cfg.conditioned ? "true" : "false";
  m["modalities"] = modalities_to_string(cfg.modalities);
  m["image_side"] = std::to_string(cfg.image_side);
  m["train_fraction"] = num(cfg.train_fraction);
  m["crop"] = cfg.crop ? "true" : "false";
  m["crop_pad"] = std::to_string(cfg.crop_pad);
  return m;
}

TrainConfig train_config_from_manifest(const Manifest& m) {
  // Only keys a TrainConfig writes; the rest of the manifest is provenance.
  IniMap ini;
  for (const auto& [k, unused] : train_manifest(TrainConfig{})) {
    if (auto it = m.find(k); it != m.end()) ini["train." + k] = it->second;
  }
  return train_config_from_ini(ini);
}

void save_checkpoint(const fs::path& dir, const TrainState& state, const TrainConfig& cfg, const Manifest& extra) {
  fs::create_directories(dir);
  const auto n = static_cast<std::uint64_t>(state.model.parameters().size());
  std::vector<TensorF64> blocks(3);
  blocks[0].dims = {n};
  blocks[0].data.assign(state.model.parameters().data(), state.model.parameters().data() + n);
  for (int i = 1; i <= 2; ++i) {
    const VectorXd& src = i == 1 ? state.adam.m : state.adam.v;
    blocks[i].dims = {static_cast<std::uint64_t>(src.size())};
    blocks[i].data.assign(src.data(), src.data() + src.size());
  }
  save_tensors(dir / "model.tns", blocks);
  Manifest m = train_manifest(cfg);
  for (const auto& [k, v] : extra) m[k] = v;
  m["epochs_done"] = std::to_string(state.epochs_done);
  m["adam_step"] = std::to_string(state.adam.step);
  m["condition_dim"] = std::to_string(state.model.config().condition_dim);
  m["parameters"] = std::to_string(n);
  m["tool_version"] = kToolVersion;
  write_manifest(dir / "manifest", m);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "manifest") || !fs::exists(dir / "model.tns")) {
    throw InvalidInput("no checkpoint in " + dir.string());
  }
  Checkpoint c;
  c.manifest = read_manifest(dir / "manifest");
  c.config = train_config_from_manifest(c.manifest);
  const std::size_t cond = std::stoull(c.manifest.at("condition_dim"));
  c.state = initial_state(c.config, cond);
  const auto blocks = load_tensors<double>(dir / "model.tns");
  if (blocks.size() != 3) throw InvalidInput("checkpoint model.tns must hold three blocks");
  VectorXd& p = c.state.model.parameters();
  if (blocks[0].data.size() != static_cast<std::size_t>(p.size())) {
    throw InvalidInput("checkpoint parameter count does not match its manifest");
  }
  p = Eigen::Map<const VectorXd>(blocks[0].data.data(), p.size());
  if (!blocks[1].data.empty()) {
    c.state.adam.m = Eigen::Map<const VectorXd>(blocks[1].data.data(), static_cast<Eigen::Index>(blocks[1].data.size()));
    c.state.adam.v = Eigen::Map<const VectorXd>(blocks[2].data.data(), static_cast<Eigen::Index>(blocks[2].data.size()));
  }
  c.state.adam.step = std::stoull(c.manifest.at("adam_step"));
  c.state.epochs_done = std::stoull(c.manifest.at("epochs_done"));
  return c;
}

void write_curve_csv(const fs::path& path, const std::vector<EpochStats>& curve) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "epoch,beta,train_loss,val_loss,val_visual_bce,val_tactile_bce,val_pose_mse\n";
  char buf[256];
  for (const EpochStats& s : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.epoch, s.beta, s.train_loss,
                  s.val_loss, s.val_visual_bce, s.val_tactile_bce, s.val_pose_mse);
    out << buf;
  }
}

}  // namespace stsim
