#include "dm/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>

namespace dm::io {

TrajectoryData::TrajectoryData(sim::RoadwayPtr roadway,
                               std::vector<TrajectoryEpisode> eps)
    : roadway_(std::move(roadway)), episodes_(std::move(eps)) {
  for (const auto& ep : episodes_) {
    for (const auto& tr : ep.vehicles) {
      if (tr.length() != ep.length())
        throw InsufficientData("vehicle tracks must span the whole episode");
    }
  }
}

int64_t TrajectoryData::episode_length(int64_t episode) const {
  return this->episode(episode).length();
}

int TrajectoryData::vehicle_count(int64_t episode) const {
  return static_cast<int>(this->episode(episode).vehicles.size());
}

const TrajectoryEpisode& TrajectoryData::episode(int64_t e) const {
  if (e < 0 || e >= episode_count())
    throw InsufficientData("episode index out of range");
  return episodes_[static_cast<size_t>(e)];
}

sim::Scene TrajectoryData::scene_at(int64_t e, int64_t step) const {
  const TrajectoryEpisode& ep = episode(e);
  if (step < 0 || step >= ep.length())
    throw EpisodeTooShort("step beyond recorded episode");
  sim::Scene scene;
  scene.roadway = roadway_;
  scene.step_index = step;
  scene.vehicles.reserve(ep.vehicles.size());
  auto at = static_cast<size_t>(step);
  for (const auto& tr : ep.vehicles) {
    sim::VehicleState v;
    v.id = tr.id;
    v.shape = tr.shape;
    v.pose = {tr.x[at], tr.y[at], tr.theta[at]};
    v.speed = tr.v[at];
    v.lane_pos = roadway_->project(v.pose, 1e18);
    if (step > 0) v.last_action = {tr.a[at - 1], tr.omega[at - 1]};
    scene.vehicles.push_back(std::move(v));
  }
  return scene;
}

const VehicleTrack& TrajectoryData::track(int64_t e, int vehicle_id) const {
  for (const auto& tr : episode(e).vehicles)
    if (tr.id == vehicle_id) return tr;
  throw UnknownVehicle("vehicle " + std::to_string(vehicle_id) +
                       " not in episode " + std::to_string(e));
}

sim::Action TrajectoryData::action_at(int64_t e, int64_t step,
                                      int vehicle_id) const {
  const VehicleTrack& tr = track(e, vehicle_id);
  if (step < 0 || step >= tr.length())
    throw EpisodeTooShort("action beyond recorded episode");
  return {tr.a[static_cast<size_t>(step)], tr.omega[static_cast<size_t>(step)]};
}

std::optional<drivers::StyleClass> TrajectoryData::style_of(
    int64_t e, int vehicle_id) const {
  return track(e, vehicle_id).style;
}

int64_t TrajectoryData::total_steps() const {
  int64_t n = 0;
  for (const auto& ep : episodes_) n += ep.length();
  return n;
}

int64_t TrajectoryData::min_episode_length() const {
  int64_t n = episodes_.empty() ? 0 : episodes_.front().length();
  for (const auto& ep : episodes_) n = std::min(n, ep.length());
  return n;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<size_t>(len));
}

constexpr const char* kHeader =
    "episode_id,step,vehicle_id,x,y,theta,v,length,width,lane,s,t,phi,a,"
    "omega,style_label";

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path,
                          const TrajectoryData& data) {
  std::string out;
  out += kHeader;
  out += "\n";
  for (const auto& ep : data.episodes()) {
    for (const auto& tr : ep.vehicles) {
      for (int64_t step = 0; step < tr.length(); ++step) {
        auto i = static_cast<size_t>(step);
        out += std::to_string(ep.id);
        out += ",";
        out += std::to_string(step);
        out += ",";
        out += std::to_string(tr.id);
        for (double v : {tr.x[i], tr.y[i], tr.theta[i], tr.v[i],
                         tr.shape.length, tr.shape.width}) {
          out += ",";
          append_double(out, v);
        }
        out += ",";
        out += std::to_string(tr.lane[i]);
        for (double v : {tr.s[i], tr.t[i], tr.phi[i], tr.a[i], tr.omega[i]}) {
          out += ",";
          append_double(out, v);
        }
        out += ",";
        if (tr.style) out += drivers::style_name(*tr.style);
        out += "\n";
      }
    }
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
  }
  std::filesystem::rename(tmp, path);
}

namespace {

struct RawRow {
  int64_t episode;
  int64_t step;
  int vehicle;
  double x, y, theta, v, length, width;
  int lane;
  double s, t, phi, a, omega;
  std::string style;
};

double parse_double(std::string_view field, int line) {
  double out = 0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc() || p != field.data() + field.size())
    throw ConfigError("trajectory csv: bad number at line " +
                      std::to_string(line));
  return out;
}

int64_t parse_int(std::string_view field, int line) {
  int64_t out = 0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc() || p != field.data() + field.size())
    throw ConfigError("trajectory csv: bad integer at line " +
                      std::to_string(line));
  return out;
}

}  // namespace

TrajectoryData read_trajectory_csv(const std::filesystem::path& path,
                                   sim::RoadwayPtr roadway) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty trajectory file");
  if (line.size() && line.back() == '\r') line.pop_back();
  if (line != kHeader)
    throw ConfigError("unexpected trajectory csv header in " + path.string());

  std::vector<RawRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string_view, 16> fields;
    std::string_view rest = line;
    for (int f = 0; f < 16; ++f) {
      size_t comma = rest.find(',');
      if (comma == std::string_view::npos) {
        if (f != 15)
          throw ConfigError("trajectory csv: short row at line " +
                            std::to_string(lineno));
        fields[static_cast<size_t>(f)] = rest;
        rest = {};
      } else {
        fields[static_cast<size_t>(f)] = rest.substr(0, comma);
        rest = rest.substr(comma + 1);
      }
    }
    RawRow r;
    r.episode = parse_int(fields[0], lineno);
    r.step = parse_int(fields[1], lineno);
    r.vehicle = static_cast<int>(parse_int(fields[2], lineno));
    r.x = parse_double(fields[3], lineno);
    r.y = parse_double(fields[4], lineno);
    r.theta = parse_double(fields[5], lineno);
    r.v = parse_double(fields[6], lineno);
    r.length = parse_double(fields[7], lineno);
    r.width = parse_double(fields[8], lineno);
    r.lane = static_cast<int>(parse_int(fields[9], lineno));
    r.s = parse_double(fields[10], lineno);
    r.t = parse_double(fields[11], lineno);
    r.phi = parse_double(fields[12], lineno);
    r.a = parse_double(fields[13], lineno);
    r.omega = parse_double(fields[14], lineno);
    r.style = std::string(fields[15]);
    rows.push_back(std::move(r));
  }

  std::vector<TrajectoryEpisode> episodes;
  auto find_episode = [&](int64_t id) -> TrajectoryEpisode& {
    for (auto& ep : episodes)
      if (ep.id == id) return ep;
    episodes.push_back({});
    episodes.back().id = id;
    return episodes.back();
  };
  for (const RawRow& r : rows) {
    TrajectoryEpisode& ep = find_episode(r.episode);
    VehicleTrack* tr = nullptr;
    for (auto& t : ep.vehicles)
      if (t.id == r.vehicle) tr = &t;
    if (!tr) {
      ep.vehicles.push_back({});
      tr = &ep.vehicles.back();
      tr->id = r.vehicle;
      tr->shape = {r.length, r.width};
      if (!r.style.empty()) {
        auto style = drivers::style_from_name(r.style);
        if (!style)
          throw ConfigError("trajectory csv: unknown style " + r.style);
        tr->style = style;
      }
    }
    if (r.step != tr->length())
      throw ConfigError("trajectory csv: steps not contiguous for vehicle " +
                        std::to_string(r.vehicle));
    tr->x.push_back(r.x);
    tr->y.push_back(r.y);
    tr->theta.push_back(r.theta);
    tr->v.push_back(r.v);
    tr->lane.push_back(r.lane);
    tr->s.push_back(r.s);
    tr->t.push_back(r.t);
    tr->phi.push_back(r.phi);
    tr->a.push_back(r.a);
    tr->omega.push_back(r.omega);
  }
  return TrajectoryData(std::move(roadway), std::move(episodes));
}

ExpertDataset::ExpertDataset(const TrajectoryData& data,
                             feat::FeatureConfig features)
    : data_(data), features_(features) {
  for (int64_t e = 0; e < data_.episode_count(); ++e) {
    const auto& ep = data_.episode(e);
    for (const auto& tr : ep.vehicles) tracks_.push_back({e, tr.id, 0, tr.length()});
    // step-major order so sequential extraction reuses each scene build
    for (int64_t step = 0; step < ep.length(); ++step) {
      for (const auto& tr : ep.vehicles) index_.push_back({e, step, tr.id});
    }
  }
}

critic::PairBlock ExpertDataset::sample(int n, RngStream& rng) const {
  if (index_.empty()) throw InsufficientData("no expert pairs");
  critic::PairBlock out;
  out.source = critic::PairSource::Expert;
  out.observations.reserve(static_cast<size_t>(n));
  out.actions = nn::Tensor(n, 2);
  for (int i = 0; i < n; ++i) {
    const PairRef& ref = index_[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(index_.size()) - 1))];
    sim::Scene scene = data_.scene_at(ref.episode, ref.step);
    out.observations.push_back(
        feat::extract_observation(scene, ref.vehicle_id, features_));
    sim::Action a = data_.action_at(ref.episode, ref.step, ref.vehicle_id);
    out.actions(i, 0) = a.accel;
    out.actions(i, 1) = a.turn_rate;
  }
  return out;
}

critic::PairBlock ExpertDataset::all(int64_t cap, RngStream* rng) const {
  std::vector<size_t> picks;
  if (cap > 0 && cap < static_cast<int64_t>(index_.size())) {
    if (!rng) throw InsufficientData("capped extraction needs an rng");
    std::vector<int> subset = rng->sample_without_replacement(
        static_cast<int>(index_.size()), static_cast<int>(cap));
    std::sort(subset.begin(), subset.end());
    picks.assign(subset.begin(), subset.end());
  } else {
    picks.resize(index_.size());
    for (size_t i = 0; i < picks.size(); ++i) picks[i] = i;
  }
  critic::PairBlock out;
  out.source = critic::PairSource::Expert;
  out.observations.reserve(picks.size());
  out.actions = nn::Tensor(static_cast<int64_t>(picks.size()), 2);
  int64_t row = 0;
  int64_t last_ep = -1, last_step = -1;
  sim::Scene scene;
  for (size_t p : picks) {
    const PairRef& ref = index_[p];
    if (ref.episode != last_ep || ref.step != last_step) {
      scene = data_.scene_at(ref.episode, ref.step);
      last_ep = ref.episode;
      last_step = ref.step;
    }
    out.observations.push_back(
        feat::extract_observation(scene, ref.vehicle_id, features_));
    sim::Action a = data_.action_at(ref.episode, ref.step, ref.vehicle_id);
    out.actions(row, 0) = a.accel;
    out.actions(row, 1) = a.turn_rate;
    ++row;
  }
  return out;
}

critic::PairBlock ExpertDataset::extract_sequence(const SequenceRef& ref) const {
  critic::PairBlock out;
  out.source = critic::PairSource::Expert;
  out.observations.reserve(static_cast<size_t>(ref.length));
  out.actions = nn::Tensor(ref.length, 2);
  for (int64_t k = 0; k < ref.length; ++k) {
    sim::Scene scene = data_.scene_at(ref.episode, ref.start + k);
    out.observations.push_back(
        feat::extract_observation(scene, ref.vehicle_id, features_));
    sim::Action a = data_.action_at(ref.episode, ref.start + k, ref.vehicle_id);
    out.actions(k, 0) = a.accel;
    out.actions(k, 1) = a.turn_rate;
  }
  return out;
}

}  // namespace dm::io
