#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "stsim/scenario_config.hpp"
#include "stsim/training.hpp"

namespace stsim {

/// Section-qualified keys ("section.key") of an INI file.
using IniMap = std::map<std::string, std::string>;

IniMap read_ini(const std::filesystem::path& path);

/// [scenario], [sensor] and [episode] sections over the scenario defaults.
/// Unknown keys are rejected so typos do not pass silently.
ScenarioConfig scenario_config_from_ini(const IniMap& ini);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

/// [train] section over the TrainConfig defaults.
TrainConfig train_config_from_ini(const IniMap& ini);
TrainConfig load_train_config(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

std::vector<std::size_t> parse_size_list(const std::string& s);
ModalitySet parse_modalities(const std::string& s);
std::string modalities_to_string(ModalitySet s);
PairMode parse_pair_mode(const std::string& s);
std::string to_string(PairMode mode);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace stsim
