#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dm/critic.hpp"
#include "dm/drivers.hpp"
#include "dm/features.hpp"
#include "dm/scene.hpp"

namespace dm::io {

/// One vehicle's recorded track within an episode. All arrays share the
/// episode length; `a`/`omega` hold the action applied at each step.
struct VehicleTrack {
  int id = 0;
  sim::Shape shape;
  std::optional<drivers::StyleClass> style;
  std::vector<double> x, y, theta, v, s, t, phi, a, omega;
  std::vector<int> lane;

  int64_t length() const { return static_cast<int64_t>(x.size()); }
};

struct TrajectoryEpisode {
  int64_t id = 0;
  std::vector<VehicleTrack> vehicles;

  int64_t length() const {
    return vehicles.empty() ? 0 : vehicles.front().length();
  }
};

/// In-memory demonstration/trajectory store backed by the CSV format:
///   episode_id,step,vehicle_id,x,y,theta,v,length,width,lane,s,t,phi,a,
///   omega,style_label
/// Steps are contiguous per (episode, vehicle); floats are written with
/// round-trip precision so playback reproduces recorded states exactly.
class TrajectoryData : public sim::SceneSource {
 public:
  TrajectoryData() = default;
  TrajectoryData(sim::RoadwayPtr roadway, std::vector<TrajectoryEpisode> eps);

  // SceneSource
  int64_t episode_count() const override {
    return static_cast<int64_t>(episodes_.size());
  }
  int64_t episode_length(int64_t episode) const override;
  int vehicle_count(int64_t episode) const override;
  sim::Scene scene_at(int64_t episode, int64_t step) const override;

  const TrajectoryEpisode& episode(int64_t e) const;
  const std::vector<TrajectoryEpisode>& episodes() const { return episodes_; }
  sim::RoadwayPtr roadway() const { return roadway_; }

  /// Action recorded for a vehicle at a step (playback control).
  sim::Action action_at(int64_t episode, int64_t step, int vehicle_id) const;
  std::optional<drivers::StyleClass> style_of(int64_t episode,
                                              int vehicle_id) const;
  const VehicleTrack& track(int64_t episode, int vehicle_id) const;

  int64_t total_steps() const;
  int64_t min_episode_length() const;

 private:
  sim::RoadwayPtr roadway_;
  std::vector<TrajectoryEpisode> episodes_;
};

void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryData& data);
TrajectoryData read_trajectory_csv(const std::filesystem::path& path,
                                   sim::RoadwayPtr roadway);

/// Lazily extracts expert (observation, action) pairs by replaying recorded
/// scenes through the feature extractor.
class ExpertDataset : public critic::ExpertSampler {
 public:
  ExpertDataset(const TrajectoryData& data, feat::FeatureConfig features);

  size_t size() const override { return index_.size(); }
  critic::PairBlock sample(int n, RngStream& rng) const override;

  /// Extract every pair (memory permitting); used by BC and fitting helpers.
  critic::PairBlock all(int64_t cap = -1, RngStream* rng = nullptr) const;

  struct SequenceRef {
    int64_t episode;
    int vehicle_id;
    int64_t start;
    int64_t length;
  };
  /// (observation, action) rows for a contiguous track segment.
  critic::PairBlock extract_sequence(const SequenceRef& ref) const;

  const std::vector<SequenceRef>& tracks() const { return tracks_; }
  const TrajectoryData& data() const { return data_; }
  const feat::FeatureConfig& features() const { return features_; }

 private:
  struct PairRef {
    int64_t episode;
    int64_t step;
    int vehicle_id;
  };
  const TrajectoryData& data_;
  feat::FeatureConfig features_;
  std::vector<PairRef> index_;
  std::vector<SequenceRef> tracks_;  // one per (episode, vehicle)
};

}  // namespace dm::io
