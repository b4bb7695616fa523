#include "stsim/episode.hpp"

namespace stsim {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kFreefall: return "freefall";
    case ScenarioKind::kIncline: return "incline";
    case ScenarioKind::kPerturb: return "perturb";
  }
  return "freefall";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "freefall") return ScenarioKind::kFreefall;
  if (name == "incline") return ScenarioKind::kIncline;
  if (name == "perturb") return ScenarioKind::kPerturb;
  throw InvalidInput("unknown scenario kind '" + name + "'");
}

void EpisodeRecord::validate() const {
  if (frames.size() < 2) throw InvalidInput("episode must contain at least two frames");
  const bool perturb = meta.kind == ScenarioKind::kPerturb;
  if (perturb != !condition.empty()) {
    throw InvalidInput("condition vector must be present exactly for perturb episodes");
  }
  if (perturb && condition.size() != 3) throw InvalidInput("condition vector must have three components");
  const Frame& first = frames.front();
  const std::size_t w = first.visual.width();
  const std::size_t h = first.visual.height();
  for (const Frame& f : frames) {
    if (f.visual.width() != w || f.visual.height() != h || f.tactile.width() != w || f.tactile.height() != h ||
        !f.contact.same_shape(w, h) || !f.visual_mask.same_shape(w, h)) {
      throw InvalidInput("episode frames have inconsistent image sizes");
    }
  }
}

}  // namespace stsim
