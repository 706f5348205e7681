#include "dm/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace dm::eval {

namespace {

int sample_categorical(std::span<const double> probs, RngStream& rng) {
  double u = rng.uniform();
  double acc = 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

RolloutSet rollout_eval(PolicyVariant policy, const io::TrajectoryData& source,
                        const train::EnvConfig& env_cfg, const EvalConfig& cfg,
                        const train::QNetwork* encoder) {
  const auto* nn_policy = std::holds_alternative<const policy::GaussianPolicy*>(policy)
                              ? std::get<const policy::GaussianPolicy*>(policy)
                              : nullptr;
  const auto* sg = std::holds_alternative<const drivers::StaticGaussianModel*>(policy)
                       ? std::get<const drivers::StaticGaussianModel*>(policy)
                       : nullptr;

  train::EnvConfig env_conf = env_cfg;
  env_conf.rollout_horizon = cfg.horizon;
  train::DrivingEnv env(source, env_conf);

  int64_t needed = cfg.burn_in + cfg.horizon + 1;
  std::vector<int64_t> eligible;
  for (int64_t e = 0; e < source.episode_count(); ++e) {
    if (source.episode_length(e) >= needed &&
        source.vehicle_count(e) >= cfg.controlled)
      eligible.push_back(e);
  }
  if (eligible.empty())
    throw EpisodeTooShort("no episode long enough for the evaluation horizon");

  RolloutSet out;
  out.horizon = cfg.horizon;
  out.dt = env_conf.sim.dt;

  std::vector<double> prior;
  std::unique_ptr<io::ExpertDataset> segments;
  if (nn_policy && nn_policy->latent()) {
    prior = nn_policy->arch().latent.effective_prior();
    segments = std::make_unique<io::ExpertDataset>(source, env_conf.features);
  }

  for (int r = 0; r < cfg.n_rollouts; ++r) {
    RngStream rng =
        RngStream::substream(cfg.master_seed, "eval", static_cast<uint64_t>(r));
    uint64_t dyn_seed = rng.next_u64();

    int64_t ep = eligible[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(eligible.size()) - 1))];
    int64_t latest_start =
        source.episode_length(ep) - needed;
    int64_t start = cfg.burn_in;
    if (cfg.burn_in == 0 && latest_start > 0)
      start = rng.uniform_int(0, latest_start);

    const auto& vehicles = source.episode(ep).vehicles;
    std::vector<int> picks = rng.sample_without_replacement(
        static_cast<int>(vehicles.size()), cfg.controlled);
    std::sort(picks.begin(), picks.end());
    std::vector<int> controlled;
    controlled.reserve(picks.size());
    for (int p : picks) controlled.push_back(vehicles[static_cast<size_t>(p)].id);

    std::vector<std::vector<double>> obs =
        env.reset_at(ep, start, controlled, dyn_seed);

    std::vector<int> codes;
    if (nn_policy && nn_policy->latent()) {
      for (int id : controlled) {
        if (cfg.z_from_encoder && encoder && cfg.burn_in > 0) {
          critic::PairBlock seg =
              segments->extract_sequence({ep, id, 0, cfg.burn_in});
          Eigen::VectorXd post = train::burn_in_infer(*encoder, seg);
          int best = 0;
          for (int k = 1; k < post.size(); ++k)
            if (post[k] > post[best]) best = k;
          codes.push_back(best);  // argmax at evaluation
        } else {
          codes.push_back(sample_categorical(prior, rng));
        }
      }
    }

    int m = static_cast<int>(controlled.size());
    nn::Tensor hidden =
        nn_policy ? nn_policy->initial_hidden(m) : nn::Tensor(m, 0);
    std::vector<AgentTrace> traces(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      traces[static_cast<size_t>(i)].rollout = r;
      traces[static_cast<size_t>(i)].agent_id = controlled[static_cast<size_t>(i)];
      traces[static_cast<size_t>(i)].latent =
          codes.empty() ? -1 : codes[static_cast<size_t>(i)];
    }

    for (int h = 0; h < cfg.horizon; ++h) {
      std::vector<sim::Action> actions(static_cast<size_t>(m));
      if (nn_policy) {
        policy::GaussianPolicy::ActOut act =
            nn_policy->act(obs, hidden, codes, rng);
        actions = act.actions;
        hidden = act.hidden;
      } else {
        for (int i = 0; i < m; ++i)
          actions[static_cast<size_t>(i)] = drivers::sample_static_gaussian(*sg, rng);
      }
      train::EnvStepResult step = env.step(actions);
      int64_t now = start + h + 1;
      for (int i = 0; i < m; ++i) {
        AgentTrace& tr = traces[static_cast<size_t>(i)];
        const auto& truth = source.track(ep, controlled[static_cast<size_t>(i)]);
        auto ti = static_cast<size_t>(now);
        tr.truth_x.push_back(truth.x[ti]);
        tr.truth_y.push_back(truth.y[ti]);
        tr.truth_v.push_back(truth.v[ti]);
        tr.truth_t.push_back(truth.t[ti]);
        const auto& st = env.scene().require(controlled[static_cast<size_t>(i)]);
        tr.pol_x.push_back(st.pose.x);
        tr.pol_y.push_back(st.pose.y);
        tr.pol_v.push_back(st.speed);
        tr.pol_t.push_back(st.lane_pos.t);
        tr.d_road.push_back(step.d_road[static_cast<size_t>(i)]);
        tr.applied_accel.push_back(step.applied_accel[static_cast<size_t>(i)]);
        tr.collided.push_back(step.collided[static_cast<size_t>(i)]);
      }
      obs = std::move(step.observations);
      if (step.done) break;
    }
    for (auto& tr : traces) out.traces.push_back(std::move(tr));
  }
  return out;
}

RmseCurves rmse_curves(const RolloutSet& rollouts) {
  if (rollouts.traces.empty())
    throw InsufficientData("rmse_curves needs at least one paired trace");
  RmseCurves out;
  int horizon = rollouts.horizon;
  out.position.assign(static_cast<size_t>(horizon), 0.0);
  out.speed.assign(static_cast<size_t>(horizon), 0.0);
  out.lane_offset.assign(static_cast<size_t>(horizon), 0.0);
  std::vector<int64_t> counts(static_cast<size_t>(horizon), 0);
  for (const AgentTrace& tr : rollouts.traces) {
    for (size_t h = 0; h < tr.truth_x.size(); ++h) {
      double dx = tr.pol_x[h] - tr.truth_x[h];
      double dy = tr.pol_y[h] - tr.truth_y[h];
      double dv = tr.pol_v[h] - tr.truth_v[h];
      double dt_off = tr.pol_t[h] - tr.truth_t[h];
      out.position[h] += dx * dx + dy * dy;
      out.speed[h] += dv * dv;
      out.lane_offset[h] += dt_off * dt_off;
      ++counts[h];
    }
  }
  for (size_t h = 0; h < out.position.size(); ++h) {
    double n = static_cast<double>(std::max<int64_t>(1, counts[h]));
    out.position[h] = std::sqrt(out.position[h] / n);
    out.speed[h] = std::sqrt(out.speed[h] / n);
    out.lane_offset[h] = std::sqrt(out.lane_offset[h] / n);
  }
  return out;
}

EventMetrics undesirable_rates(const RolloutSet& rollouts) {
  EventMetrics out;
  if (rollouts.traces.empty()) return out;
  int64_t episodes = 0, collided_episodes = 0;
  int64_t steps = 0, brake_steps = 0;
  double offroad_seconds = 0;
  for (const AgentTrace& tr : rollouts.traces) {
    ++episodes;
    bool any_collision = false;
    int64_t offroad_steps = 0;
    for (size_t h = 0; h < tr.collided.size(); ++h) {
      any_collision = any_collision || tr.collided[h];
      if (tr.d_road[h] <= -0.1) ++offroad_steps;
      if (tr.applied_accel[h] <= -3.0) ++brake_steps;
      ++steps;
    }
    if (any_collision) ++collided_episodes;
    offroad_seconds += static_cast<double>(offroad_steps) * rollouts.dt;
  }
  out.collision_rate =
      static_cast<double>(collided_episodes) / static_cast<double>(episodes);
  out.offroad_duration = offroad_seconds / static_cast<double>(episodes);
  out.hard_brake_rate =
      static_cast<double>(brake_steps) / static_cast<double>(std::max<int64_t>(1, steps));
  return out;
}

std::vector<ScalingRow> scaling_study(PolicyVariant policy,
                                      const io::TrajectoryData& source,
                                      const train::EnvConfig& env_cfg,
                                      const EvalConfig& cfg) {
  std::vector<ScalingRow> rows;
  for (int count : cfg.agent_counts) {
    EvalConfig sub = cfg;
    sub.controlled = count;
    sub.agent_counts.clear();
    ScalingRow row;
    row.agent_count = count;
    if (count == 0) {
      rows.push_back(row);  // pure playback: zero error by construction
      continue;
    }
    RolloutSet set = rollout_eval(policy, source, env_cfg, sub);
    RmseCurves curves = rmse_curves(set);
    double sum = 0;
    for (double v : curves.position) sum += v;
    row.mean_position_rmse =
        curves.position.empty() ? 0.0
                                : sum / static_cast<double>(curves.position.size());
    rows.push_back(row);
  }
  return rows;
}

StyleAccuracy style_accuracy(const train::QNetwork& encoder,
                             const io::ExpertDataset& dataset,
                             int segment_len) {
  StyleAccuracy out;
  int64_t correct = 0;
  for (const auto& trk : dataset.tracks()) {
    auto style = dataset.data().style_of(trk.episode, trk.vehicle_id);
    if (!style) continue;
    int64_t len = std::min<int64_t>(segment_len, trk.length);
    critic::PairBlock seg =
        dataset.extract_sequence({trk.episode, trk.vehicle_id, 0, len});
    Eigen::VectorXd post = encoder.posterior(seg);
    int best = 0;
    for (int k = 1; k < post.size(); ++k)
      if (post[k] > post[best]) best = k;
    if (best == static_cast<int>(*style)) ++correct;
    ++out.count;
  }
  if (out.count == 0) throw InsufficientData("no labeled segments");
  double n = static_cast<double>(out.count);
  out.accuracy = static_cast<double>(correct) / n;
  double half = 1.96 * std::sqrt(out.accuracy * (1.0 - out.accuracy) / n);
  out.ci_low = std::max(0.0, out.accuracy - half);
  out.ci_high = std::min(1.0, out.accuracy + half);
  return out;
}

namespace {
constexpr const char* kRolloutHeader =
    "rollout,agent_id,latent,step,truth_x,truth_y,truth_v,truth_t,pol_x,"
    "pol_y,pol_v,pol_t,d_road,applied_accel,collided";

void append_g17(std::string& s, double v) {
  char buf[40];
  int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  s.append(buf, static_cast<size_t>(len));
}
}  // namespace

void write_rollouts_csv(const std::filesystem::path& path,
                        const RolloutSet& rollouts) {
  std::string out = "horizon,";
  out += std::to_string(rollouts.horizon);
  out += ",dt,";
  append_g17(out, rollouts.dt);
  out += "\n";
  out += kRolloutHeader;
  out += "\n";
  for (const AgentTrace& tr : rollouts.traces) {
    for (size_t h = 0; h < tr.truth_x.size(); ++h) {
      out += std::to_string(tr.rollout);
      out += ",";
      out += std::to_string(tr.agent_id);
      out += ",";
      out += std::to_string(tr.latent);
      out += ",";
      out += std::to_string(h + 1);
      for (double v : {tr.truth_x[h], tr.truth_y[h], tr.truth_v[h], tr.truth_t[h],
                       tr.pol_x[h], tr.pol_y[h], tr.pol_v[h], tr.pol_t[h],
                       tr.d_road[h], tr.applied_accel[h]}) {
        out += ",";
        append_g17(out, v);
      }
      out += ",";
      out += std::to_string(static_cast<int>(tr.collided[h]));
      out += "\n";
    }
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + tmp.string());
    os << out;
  }
  std::filesystem::rename(tmp, path);
}

RolloutSet read_rollouts_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingReport("cannot read " + path.string());
  RolloutSet out;
  std::string line;
  if (!std::getline(is, line)) throw MissingReport("empty rollouts file");
  std::sscanf(line.c_str(), "horizon,%d,dt,%lf", &out.horizon, &out.dt);
  std::getline(is, line);  // header

  AgentTrace* current = nullptr;
  int cur_rollout = -1, cur_agent = -1;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 15> f{};
    size_t field = 0;
    std::string_view rest = line;
    while (field < f.size()) {
      size_t comma = rest.find(',');
      std::string_view tok =
          comma == std::string_view::npos ? rest : rest.substr(0, comma);
      double v = 0;
      std::from_chars(tok.data(), tok.data() + tok.size(), v);
      f[field++] = v;
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    int rollout = static_cast<int>(f[0]);
    int agent = static_cast<int>(f[1]);
    if (!current || rollout != cur_rollout || agent != cur_agent) {
      out.traces.push_back({});
      current = &out.traces.back();
      current->rollout = rollout;
      current->agent_id = agent;
      current->latent = static_cast<int>(f[2]);
      cur_rollout = rollout;
      cur_agent = agent;
    }
    current->truth_x.push_back(f[4]);
    current->truth_y.push_back(f[5]);
    current->truth_v.push_back(f[6]);
    current->truth_t.push_back(f[7]);
    current->pol_x.push_back(f[8]);
    current->pol_y.push_back(f[9]);
    current->pol_v.push_back(f[10]);
    current->pol_t.push_back(f[11]);
    current->d_road.push_back(f[12]);
    current->applied_accel.push_back(f[13]);
    current->collided.push_back(static_cast<uint8_t>(f[14]));
  }
  return out;
}

}  // namespace dm::eval
