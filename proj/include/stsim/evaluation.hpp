#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stsim/training.hpp"

namespace stsim {

enum class Protocol { kFinalStep, kRollout, kStride };

struct EvalScores {
  std::optional<double> visual_bce;
  std::optional<double> tactile_bce;
  std::optional<double> pose_mse;
  std::size_t pairs = 0;
  std::size_t prior_only = 0;  // predictions made with no usable input
};

/// Scores predictions from every frame t of every validation episode.
/// kFinalStep predicts the final frame T directly; kRollout applies the model
/// ceil((T - t) / k) times (at least once), feeding its outputs back in, and
/// scores against T; kStride predicts once and scores against min(t + k, T).
/// Inputs are restricted to `use`.
EvalScores evaluate(const MvaeModel& model, const std::vector<EpisodeTensors>& val_set, Protocol protocol,
                    std::size_t k = 1, ModalitySet use = kAllModalities);

/// No-contact tactile frame at model resolution, flattened like the data.
Eigen::VectorXd flat_tactile(std::size_t image_side);

/// A predicted tactile frame counts as touching when any channel departs
/// from the flat frame by more than `threshold`.
bool tactile_has_contact(const Eigen::VectorXd& tactile, const Eigen::VectorXd& flat, double threshold = 0.05);

/// BCE of the per-pixel mean final-frame image of `train_set` against each
/// validation final frame, over the same pairs `evaluate` scores.
double mean_image_bce(const std::vector<EpisodeTensors>& train_set, const std::vector<EpisodeTensors>& val_set,
                      Modality m);

struct TableRow {
  std::string model;
  ModalitySet modalities = kAllModalities;
  std::optional<double> visual_multi, visual_final, tactile_multi, tactile_final;
};

/// The four model rows, in order: visual only, tactile only, multimodal with
/// pose, multimodal without pose.
std::vector<TableRow> table_rows();

struct MetricsTable {
  std::string scenario;
  std::vector<TableRow> rows;

  std::string csv() const;   // header + one line per row, NA for missing cells
  std::string text() const;  // aligned, BCE x 1e-4
};

/// Side-by-side strip: input visual/tactile, predicted final visual/tactile,
/// ground-truth final visual/tactile, each upscaled by `scale`. Pose axes are
/// drawn on the visual panels: predicted solid, ground truth dashed.
RgbImage prediction_strip(const MvaeModel& model, const EpisodeTensors& episode, std::size_t input_frame,
                          std::size_t scale = 8);

}  // namespace stsim
