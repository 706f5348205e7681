#include <doctest.h>

#include "dm/checkpoint.hpp"
#include "dm/features.hpp"
#include "dm/policy.hpp"

using namespace dm;
using namespace dm::nn;

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint ckpt;
  ckpt.metadata = {{"kind", "test"}, {"seed", 7}};
  Tensor t(2, 3);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = 0.5 * static_cast<double>(i);
  ckpt.tensors.emplace_back("layer/w", std::move(t));
  ckpt.tensors.emplace_back("layer/b", Tensor(1, 3, -1.25));
  return ckpt;
}

}  // namespace

TEST_CASE("save -> load -> save yields identical bytes") {
  Checkpoint ckpt = sample_checkpoint();
  std::string bytes = serialize_checkpoint(ckpt);
  Checkpoint loaded = deserialize_checkpoint(bytes);
  std::string bytes2 = serialize_checkpoint(loaded);
  CHECK(bytes == bytes2);
  REQUIRE(loaded.tensors.size() == 2);
  CHECK(loaded.metadata.at("seed").get<int>() == 7);
  const Tensor* w = loaded.find("layer/w");
  REQUIRE(w != nullptr);
  CHECK((*w)(1, 2) == 2.5);
}

TEST_CASE("a tampered byte is rejected") {
  std::string bytes = serialize_checkpoint(sample_checkpoint());
  for (size_t at : {size_t{10}, bytes.size() / 2, bytes.size() - 6}) {
    std::string bad = bytes;
    bad[at] = static_cast<char>(bad[at] ^ 0x40);
    CHECK_THROWS_AS(deserialize_checkpoint(bad), CorruptCheckpoint);
  }
}

TEST_CASE("truncated data is rejected") {
  std::string bytes = serialize_checkpoint(sample_checkpoint());
  CHECK_THROWS_AS(deserialize_checkpoint(
                      std::string_view(bytes).substr(0, bytes.size() / 2)),
                  CorruptCheckpoint);
}

TEST_CASE("file round-trip through the atomic writer") {
  auto path = std::filesystem::temp_directory_path() / "dm_ckpt_test.dmck";
  Checkpoint ckpt = sample_checkpoint();
  write_checkpoint_file(path, ckpt);
  Checkpoint loaded = read_checkpoint_file(path);
  CHECK(serialize_checkpoint(loaded) == serialize_checkpoint(ckpt));
  std::filesystem::remove(path);
}

TEST_CASE("policy refuses to load against a different feature layout") {
  feat::FeatureConfig full;  // 60 features
  feat::ObservationLayout full_layout = feat::ObservationLayout::from_config(full);
  policy::PolicyArch arch;
  arch.trunk = policy::TrunkKind::Gru;
  arch.gru_units = 8;
  policy::GaussianPolicy policy(arch, full_layout.total, 1);
  Checkpoint ckpt = policy::policy_to_checkpoint(policy, full_layout, {});

  feat::FeatureConfig reduced = full;
  reduced.lidar = false;  // shorter observation vector
  feat::ObservationLayout reduced_layout =
      feat::ObservationLayout::from_config(reduced);
  CHECK_THROWS_AS(policy::policy_from_checkpoint(ckpt, reduced_layout),
                  VersionMismatch);

  // matching layout loads and reproduces parameters exactly
  policy::GaussianPolicy back =
      policy::policy_from_checkpoint(ckpt, full_layout);
  CHECK(back.params().flatten() == policy.params().flatten());
}
