#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stsim/episode.hpp"

namespace stsim {

inline constexpr int kEpisodeIdWidth = 6;

/// Zero-padded directory name for episode number `index`.
std::string episode_id(std::size_t index);

/// Writes `root/<id>/` with `meta`, per-frame PNGs and `frames.tns`. Refuses
/// to touch an id that already exists.
std::string write_episode(const EpisodeRecord& rec, const std::filesystem::path& root, std::size_t index);

/// Same, using one past the largest numeric id already under `root`.
std::string write_episode(const EpisodeRecord& rec, const std::filesystem::path& root);

EpisodeRecord read_episode(const std::filesystem::path& dir);

/// Numeric episode directories under `root`, sorted.
std::vector<std::string> list_episodes(const std::filesystem::path& root);

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Seeded Fisher-Yates shuffle; the first floor(fraction * n) ids train.
Split split(const std::vector<std::string>& ids, double fraction, std::uint64_t seed);

/// Box-filter average over (w/target_w) x (h/target_h) blocks.
RgbImage downsample(const RgbImage& img, std::size_t target_width, std::size_t target_height);
inline RgbImage downsample(const RgbImage& img, std::size_t target) { return downsample(img, target, target); }

struct PixelBox {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive

  std::size_t width() const { return x1 - x0 + 1; }
  std::size_t height() const { return y1 - y0 + 1; }
  bool operator==(const PixelBox&) const = default;
};

/// Tight box around set pixels grown by `pad` and clipped to the grid; false
/// for an empty mask.
bool mask_box(const Mask& mask, std::size_t pad, PixelBox& box);

/// Crops to mask_box and resamples (bilinear) back to the input size. An
/// empty mask returns the image unchanged.
RgbImage crop_to_mask(const RgbImage& img, const Mask& mask, std::size_t pad);

enum class PairKind { kFinalStep, kFixedStep };

struct PairMode {
  PairKind kind = PairKind::kFinalStep;
  std::size_t k = 1;

  static PairMode final_step() { return {}; }
  static PairMode fixed_step(std::size_t k = 1) { return {PairKind::kFixedStep, k}; }
};

struct TrainingPair {
  std::size_t input = 0;
  std::size_t target = 0;
  bool visual = true;
  bool tactile = false;  // only when the input frame is in contact
  bool pose = true;

  bool operator==(const TrainingPair&) const = default;
};

std::vector<TrainingPair> make_pairs(const EpisodeRecord& rec, PairMode mode);

}  // namespace stsim
