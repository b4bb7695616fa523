#include <doctest.h>

#include <fstream>

#include "stsim/config.hpp"
#include "test_util.hpp"

using namespace stsim;

namespace {

std::filesystem::path write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("scenario INI overrides defaults") {
  testing::TempDir dir("ini");
  const auto p = write_file(dir.path / "s.ini",
                            "[scenario]\nkind = incline\nepisodes = 12\nseed = 9\n"
                            "[sensor]\nresolution = 32\n[episode]\nrender = false\n");
  const ScenarioConfig c = load_scenario_config(p);
  CHECK(c.kind == ScenarioKind::kIncline);
  CHECK(c.episodes == 12);
  CHECK(c.seed == 9);
  CHECK(c.sensor.resolution == 32);
  CHECK_FALSE(c.options.render);
}

TEST_CASE("unknown keys and bad values are rejected") {
  testing::TempDir dir("bad");
  CHECK_THROWS_AS(load_scenario_config(write_file(dir.path / "a.ini", "[scenario]\nepisodez = 3\n")), InvalidInput);
  CHECK_THROWS_AS(load_scenario_config(write_file(dir.path / "b.ini", "[scenario]\nepisodes = many\n")), InvalidInput);
  CHECK_THROWS_AS(load_train_config(write_file(dir.path / "c.ini", "[train]\nlr = 1\n")), InvalidInput);
  CHECK_THROWS_AS(load_scenario_config(dir.path / "missing.ini"), InvalidInput);
}

TEST_CASE("train INI") {
  testing::TempDir dir("train");
  const TrainConfig c = load_train_config(write_file(
      dir.path / "t.ini", "[train]\nepochs = 7\nhidden = 32, 16\nmode = fixed_step:2\nmodalities = visual,pose\n"));
  CHECK(c.epochs == 7);
  CHECK(c.hidden == std::vector<std::size_t>{32, 16});
  CHECK(c.mode.kind == PairKind::kFixedStep);
  CHECK(c.mode.k == 2);
  CHECK(c.modalities == (bit(Modality::kVisual) | bit(Modality::kPose)));
}

TEST_CASE("modality and pair mode parsing") {
  CHECK(parse_modalities("all") == kAllModalities);
  CHECK(parse_modalities("tactile") == bit(Modality::kTactile));
  CHECK(parse_modalities(modalities_to_string(bit(Modality::kVisual) | bit(Modality::kTactile))) ==
        (bit(Modality::kVisual) | bit(Modality::kTactile)));
  CHECK_THROWS_AS(parse_modalities("smell"), InvalidInput);
  CHECK_THROWS_AS(parse_modalities(""), InvalidInput);
  CHECK(parse_pair_mode("final_step").kind == PairKind::kFinalStep);
  CHECK(parse_pair_mode("fixed_step").k == 1);
  CHECK(to_string(parse_pair_mode("fixed_step:4")) == "fixed_step:4");
  CHECK_THROWS_AS(parse_pair_mode("fixed_step:0"), InvalidInput);
  CHECK_THROWS_AS(parse_pair_mode("sometimes"), InvalidInput);
}

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifest round trip") {
  testing::TempDir dir("manifest");
  const Manifest m{{"a", "1"}, {"path", "x/y z"}, {"seed", "42"}};
  write_manifest(dir.path / "manifest", m);
  CHECK(read_manifest(dir.path / "manifest") == m);
}
