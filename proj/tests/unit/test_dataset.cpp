#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "stsim/dataset.hpp"
#include "test_util.hpp"

using namespace stsim;

namespace {

EpisodeRecord synthetic(std::size_t frames, std::size_t side = 4) {
  EpisodeRecord rec;
  rec.meta.resolution = static_cast<std::uint32_t>(side);
  for (std::size_t k = 0; k < frames; ++k) {
    Frame f;
    f.visual = RgbImage(side, side, 0.1f * k);
    f.tactile = RgbImage(side, side, 1.0f);
    f.contact = Mask(side, side, 0);
    f.visual_mask = Mask(side, side, 0);
    f.contact_active = k % 2 == 1;
    f.pose = {0, 0, 0, 1, 0, 0, 0};
    f.step = static_cast<std::uint32_t>(k);
    rec.frames.push_back(f);
  }
  return rec;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(episode_id(i));
  return v;
}

}  // namespace

TEST_CASE("episode ids are zero padded") {
  CHECK(episode_id(0) == "000000");
  CHECK(episode_id(42) == "000042");
}

TEST_CASE("write then read is field-for-field equal") {
  testing::TempDir dir("ds");
  for (auto kind : {ScenarioKind::kFreefall, ScenarioKind::kIncline, ScenarioKind::kPerturb}) {
    const EpisodeRecord rec = testing::small_episode(kind, 1);
    const std::string id = write_episode(rec, dir.path);
    const EpisodeRecord back = read_episode(dir.path / id);
    CHECK(back == rec);
    CHECK(std::filesystem::exists(dir.path / id / "frame_0000_visual.png"));
    CHECK(std::filesystem::exists(dir.path / id / "frame_0000_tactile.png"));
  }
  CHECK(list_episodes(dir.path) == ids(3));
}

TEST_CASE("perturb meta carries the three-component condition") {
  testing::TempDir dir("meta");
  const EpisodeRecord rec = testing::small_episode(ScenarioKind::kPerturb, 0);
  write_episode(rec, dir.path, 7);
  std::ifstream f(dir.path / "000007" / "meta");
  std::string line, condition;
  while (std::getline(f, line)) {
    if (line.rfind("condition", 0) == 0) condition = line;
  }
  REQUIRE_FALSE(condition.empty());
  CHECK(std::count(condition.begin(), condition.end(), ',') == 2);
}

TEST_CASE("invalid records and existing ids are refused") {
  testing::TempDir dir("refuse");
  CHECK_THROWS_AS(write_episode(EpisodeRecord{}, dir.path, 0), InvalidInput);
  const EpisodeRecord rec = synthetic(3);
  write_episode(rec, dir.path, 0);
  CHECK_THROWS_AS(write_episode(rec, dir.path, 0), InvalidInput);
  CHECK(write_episode(rec, dir.path) == "000001");
}

TEST_CASE("split sizes, determinism, floor rule") {
  const Split s = split(ids(10), 0.8, 3);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 2);
  const Split again = split(ids(10), 0.8, 3);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  std::set<std::string> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  CHECK(all.size() == 10);

  const Split half = split(ids(5), 0.5, 1);
  CHECK(half.train.size() == 2);
  CHECK(half.val.size() == 3);

  CHECK_THROWS_AS(split(ids(1), 0.5, 1), InvalidInput);
  CHECK_THROWS_AS(split(ids(4), 0.0, 1), InvalidInput);
  CHECK_THROWS_AS(split(ids(4), 1.0, 1), InvalidInput);
}

TEST_CASE("downsample") {
  const RgbImage c = downsample(RgbImage(8, 8, 0.3f), 4);
  CHECK(c.width() == 4);
  for (float v : c.values()) CHECK(v == doctest::Approx(0.3f));

  RgbImage checker(4, 4);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) checker.at(x, y, ch) = float((x + y) % 2);
  const RgbImage half = downsample(checker, 2);
  for (float v : half.values()) CHECK(v == 0.5f);

  const RgbImage big = downsample(RgbImage(128, 128, 1.0f), 64);
  CHECK(big.width() == 64);
  CHECK(big.height() == 64);
  CHECK_THROWS_AS(downsample(RgbImage(10, 10), 3), InvalidInput);
}

TEST_CASE("crop_to_mask") {
  RgbImage img(12, 10);
  for (std::size_t i = 0; i < img.values().size(); ++i) img.values()[i] = float(i % 7) / 7.0f;

  CHECK(crop_to_mask(img, Mask(12, 10, 1), 0) == img);
  CHECK(crop_to_mask(img, Mask(12, 10, 0), 3) == img);

  Mask one(12, 10, 0);
  one(6, 5) = 1;
  PixelBox box;
  REQUIRE(mask_box(one, 2, box));
  CHECK(box == PixelBox{4, 3, 8, 7});
  CHECK(box.width() == 5);
  CHECK(box.height() == 5);
  const RgbImage crop = crop_to_mask(img, one, 2);
  CHECK(crop.width() == 12);
  CHECK(crop.height() == 10);
  // Corners of the resampled crop are the corners of the box.
  CHECK(crop.at(0, 0, 0) == doctest::Approx(img.at(4, 3, 0)));
  CHECK(crop.at(11, 9, 2) == doctest::Approx(img.at(8, 7, 2)));

  Mask corner(12, 10, 0);
  corner(0, 0) = 1;
  REQUIRE(mask_box(corner, 3, box));
  CHECK(box == PixelBox{0, 0, 3, 3});
  CHECK_FALSE(mask_box(Mask(3, 3, 0), 1, box));
}

TEST_CASE("make_pairs") {
  const EpisodeRecord rec = synthetic(5);
  const auto fin = make_pairs(rec, PairMode::final_step());
  REQUIRE(fin.size() == 5);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(fin[t].input == t);
    CHECK(fin[t].target == 4);
  }
  const auto fixed = make_pairs(rec, PairMode::fixed_step(1));
  const std::vector<std::pair<std::size_t, std::size_t>> expect{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 4}};
  REQUIRE(fixed.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(fixed[i].input == expect[i].first);
    CHECK(fixed[i].target == expect[i].second);
  }
  const auto k3 = make_pairs(rec, PairMode::fixed_step(3));
  CHECK(k3[0].target == 3);
  CHECK(k3[1].target == 4);
  CHECK(k3[3].target == 4);

  CHECK(make_pairs(synthetic(2), PairMode::final_step()).size() == 2);
  CHECK(make_pairs(synthetic(2), PairMode::fixed_step(5)).size() == 2);
}

TEST_CASE("pairs never offer tactile without contact") {
  for (std::size_t i = 0; i < 4; ++i) {
    const EpisodeRecord rec = testing::small_episode(ScenarioKind::kFreefall, i);
    for (auto mode : {PairMode::final_step(), PairMode::fixed_step(2)}) {
      for (const TrainingPair& p : make_pairs(rec, mode)) {
        CHECK(p.tactile == rec.frames[p.input].contact_active);
        CHECK(p.visual);
        CHECK(p.pose);
      }
    }
  }
}
