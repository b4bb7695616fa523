#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stsim/dataset.hpp"
#include "stsim/mvae.hpp"

namespace stsim {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double anneal_epochs = 50.0;
  std::array<double, kModalityCount> lambda{1.0, 1.0, 1000.0};
  std::uint64_t seed = 1;
  std::size_t latent_dim = 16;
  std::vector<std::size_t> hidden{256, 128};
  PairMode mode = PairMode::final_step();
  bool conditioned = false;
  ModalitySet modalities = kAllModalities;
  std::size_t image_side = 16;
  double train_fraction = 0.8;
  bool crop = false;
  std::size_t crop_pad = 4;

  void validate() const;
  ModelConfig model_config(std::size_t condition_dim) const;
};

/// One episode at model resolution: columns are frames.
struct EpisodeTensors {
  std::string id;
  ScenarioKind kind = ScenarioKind::kFreefall;
  bool fell_off = false;
  std::array<Eigen::MatrixXd, kModalityCount> frames;
  std::vector<bool> contact_active;
  Eigen::VectorXd condition;

  std::size_t frame_count() const { return contact_active.size(); }
};

/// Downsamples (optionally after cropping) both images to `image_side`,
/// flattens them row-major with interleaved channels, and normalises the
/// position part of the pose by the sensor half-size.
EpisodeTensors prepare_episode(const EpisodeRecord& rec, std::size_t image_side, bool crop = false,
                               std::size_t crop_pad = 4, const std::string& id = {});

std::vector<EpisodeTensors> load_prepared(const std::filesystem::path& root, const std::vector<std::string>& ids,
                                          const TrainConfig& cfg);

struct PairRef {
  std::size_t episode = 0;
  TrainingPair pair;
};

std::vector<PairRef> collect_pairs(const std::vector<EpisodeTensors>& episodes, PairMode mode);

/// Stacks pairs into a column batch. Availability follows the pair (tactile
/// only in contact) intersected with `use`.
Batch make_batch(const std::vector<EpisodeTensors>& episodes, const std::vector<PairRef>& pairs,
                 const ModelConfig& cfg, ModalitySet use = kAllModalities);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based, continues across resumes
  double beta = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_visual_bce = 0.0;   // NaN when the model has no visual head
  double val_tactile_bce = 0.0;  // NaN when the model has no tactile head
  double val_pose_mse = 0.0;     // NaN when the model has no pose head
};

struct TrainState {
  MvaeModel model;
  AdamState adam;
  std::size_t epochs_done = 0;
};

TrainState initial_state(const TrainConfig& cfg, std::size_t condition_dim);

/// Runs `cfg.epochs` further epochs from `state`. Each epoch reshuffles with a
/// seed derived from (cfg.seed, epoch), so resuming reproduces an
/// uninterrupted run.
std::vector<EpochStats> train(TrainState& state, const std::vector<EpisodeTensors>& train_set,
                              const std::vector<EpisodeTensors>& val_set, const TrainConfig& cfg);

/// Validation metrics with the posterior mean and all inputs a pair allows.
EpochStats validate_model(const MvaeModel& model, const std::vector<EpisodeTensors>& val_set, PairMode mode,
                          double beta);

using Manifest = std::map<std::string, std::string>;

Manifest train_manifest(const TrainConfig& cfg);
TrainConfig train_config_from_manifest(const Manifest& m);

/// model.tns (f64 blocks: parameters, Adam m, Adam v) plus `manifest`.
void save_checkpoint(const std::filesystem::path& dir, const TrainState& state, const TrainConfig& cfg,
                     const Manifest& extra = {});

struct Checkpoint {
  TrainState state;
  TrainConfig config;
  Manifest manifest;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

void write_curve_csv(const std::filesystem::path& path, const std::vector<EpochStats>& curve);

}  // namespace stsim
