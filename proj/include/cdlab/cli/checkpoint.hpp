#pragma once

// Binary checkpoint: fixed header (magic, version, architecture and schedule
// descriptors, training metadata) followed by the flat parameter array as
// little-endian 64-bit floats in the net's canonical layout (per layer:
// weight matrix row-major, then bias). Round trips are bit exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdlab/schedule.hpp"
#include "cdlab/score_net.hpp"

namespace cdlab {

struct checkpoint_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ScoreNetConfig net_cfg;
  ScheduleKind sched_kind = ScheduleKind::kLinearBeta;
  int sched_T = 0;
  ScheduleParams sched_params;
  std::uint64_t train_seed = 0;
  double final_loss = 0.0;
  Eigen::VectorXd params;

  ScoreNet restore_net() const {
    ScoreNet net = ScoreNet::create(net_cfg, 0);
    net.load_params(params);
    return net;
  }

  NoiseSchedule restore_schedule() const { return build_schedule(sched_kind, sched_T, sched_params); }
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

inline constexpr char kCkptMagic[8] = {'C', 'D', 'L', 'A', 'B', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw checkpoint_error("checkpoint truncated while reading a field");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw checkpoint_error("cannot open checkpoint file for writing: " + path);
  os.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
  detail::put<std::uint32_t>(os, detail::kCkptVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.net_cfg.dim));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.net_cfg.hidden.size()));
  for (int h : ckpt.net_cfg.hidden) detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(h));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.net_cfg.time_freqs));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.net_cfg.num_classes));
  detail::put<std::uint8_t>(os, ckpt.sched_kind == ScheduleKind::kLinearBeta ? 0 : 1);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.sched_T));
  detail::put<double>(os, ckpt.sched_params.beta1);
  detail::put<double>(os, ckpt.sched_params.betaT);
  detail::put<double>(os, ckpt.sched_params.cosine_s);
  detail::put<std::uint64_t>(os, ckpt.train_seed);
  detail::put<double>(os, ckpt.final_loss);
  detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(ckpt.params.size()));
  os.write(reinterpret_cast<const char*>(ckpt.params.data()),
           static_cast<std::streamsize>(ckpt.params.size() * sizeof(double)));
  if (!os) throw checkpoint_error("write failure on checkpoint file: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw checkpoint_error("cannot open checkpoint file: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, detail::kCkptMagic, sizeof(magic)) != 0)
    throw checkpoint_error("bad checkpoint magic in " + path);
  const auto version = detail::get<std::uint32_t>(is);
  if (version != detail::kCkptVersion)
    throw checkpoint_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.net_cfg.dim = static_cast<int>(detail::get<std::uint32_t>(is));
  const auto n_hidden = detail::get<std::uint32_t>(is);
  if (n_hidden > 64) throw checkpoint_error("implausible hidden layer count in checkpoint header");
  ckpt.net_cfg.hidden.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i)
    ckpt.net_cfg.hidden.push_back(static_cast<int>(detail::get<std::uint32_t>(is)));
  ckpt.net_cfg.time_freqs = static_cast<int>(detail::get<std::uint32_t>(is));
  ckpt.net_cfg.num_classes = static_cast<int>(detail::get<std::uint32_t>(is));
  ckpt.sched_kind =
      detail::get<std::uint8_t>(is) == 0 ? ScheduleKind::kLinearBeta : ScheduleKind::kCosine;
  ckpt.sched_T = static_cast<int>(detail::get<std::uint32_t>(is));
  ckpt.sched_params.beta1 = detail::get<double>(is);
  ckpt.sched_params.betaT = detail::get<double>(is);
  ckpt.sched_params.cosine_s = detail::get<double>(is);
  ckpt.train_seed = detail::get<std::uint64_t>(is);
  ckpt.final_loss = detail::get<double>(is);
  const auto count = detail::get<std::uint64_t>(is);
  ScoreNet probe = ScoreNet::create(ckpt.net_cfg, 0);
  if (count != static_cast<std::uint64_t>(probe.param_count()))
    throw checkpoint_error("checkpoint parameter count does not match its architecture header");
  ckpt.params.resize(static_cast<Eigen::Index>(count));
  is.read(reinterpret_cast<char*>(ckpt.params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw checkpoint_error("checkpoint truncated in parameter array: " + path);
  return ckpt;
}

}  // namespace cdlab
