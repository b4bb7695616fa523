#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stsim/core.hpp"

namespace stsim {

enum class ScenarioKind { kFreefall, kIncline, kPerturb };

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);

/// Position (3) followed by a w-first unit quaternion (4).
using PoseVector = std::array<float, 7>;

struct Frame {
  RgbImage visual;
  RgbImage tactile;
  PoseVector pose{};
  Mask contact;       // tactile contact footprint
  Mask visual_mask;   // pixels covered by the object in the visual view
  bool contact_active = false;
  std::uint32_t step = 0;  // physics step at which the frame was captured

  bool operator==(const Frame&) const = default;
};

struct RestState {
  bool resting = false;
  bool fell_off = false;
  bool unresolved = false;
  std::uint32_t frames_to_rest = 0;  // physics steps until rest was detected
  PoseVector final_pose{};

  bool operator==(const RestState&) const = default;
};

/// Flat key/value description of how an episode was produced.
struct EpisodeMeta {
  ScenarioKind kind = ScenarioKind::kFreefall;
  std::uint64_t seed = 0;
  double gravity = 9.81;
  double incline_angle = 0.0;
  double perturb_magnitude = 0.0;
  double perturb_direction = 0.0;
  std::string shape;
  std::array<double, 3> shape_dims{};
  double mass = 0.0;
  double friction = 0.0;
  double restitution = 0.0;
  std::array<double, 3> color{};
  double sensor_half_size = 0.0;
  std::uint32_t resolution = 0;
  double dt = 0.0;
  std::uint32_t capture_stride = 0;

  bool operator==(const EpisodeMeta&) const = default;
};

struct EpisodeRecord {
  EpisodeMeta meta;
  std::vector<float> condition;  // (magnitude, cos phi, sin phi) for perturb episodes
  std::vector<Frame> frames;
  RestState rest;

  /// Throws InvalidInput unless the record has >= 2 frames of consistent size
  /// and carries a condition vector exactly when it is a perturb episode.
  void validate() const;

  bool operator==(const EpisodeRecord&) const = default;
};

}  // namespace stsim
