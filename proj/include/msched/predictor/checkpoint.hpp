#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "msched/errors.hpp"
#include "msched/predictor/predictor.hpp"
#include "msched/textio.hpp"
#include "msched/schedspace/zoo.hpp"

namespace msched {

inline constexpr std::string_view kCheckpointTag = "msched-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t zoo_fingerprint = 0;
  std::unique_ptr<SchedulePredictor> predictor;

  /// Throws IncompatibleCheckpoint unless the zoo matches the one used for training.
  void require_zoo(const ModelZoo& zoo) const {
    const auto& cfg = predictor->config();
    if (zoo.size() != cfg.model_count || zoo.fingerprint() != zoo_fingerprint) {
      throw IncompatibleCheckpoint("checkpoint was trained on a zoo with " + std::to_string(cfg.model_count) +
                                   " models (fingerprint " + format_hex64(zoo_fingerprint) + "), got " +
                                   std::to_string(zoo.size()) + " models (fingerprint " +
                                   format_hex64(zoo.fingerprint()) + ")");
    }
  }
};

// Layout, one record per line:
//   msched-checkpoint 1
//   sampler <ddim|dpm-solver>
//   length <L>
//   zoo <N> <fingerprint hex>
//   noise <beta_min> <beta_max> <horizon> <t_end> <time_scale>
//   dims <d_M> <d_T> <solver> <hidden> <layers> <head_layers> <head_width>
//   params <count>
//   param <name> <rows> <cols>
//   <rows*cols values, row-major, space separated>
//   ...
//   end
inline void save_checkpoint(std::ostream& os, SchedulePredictor& p, std::uint64_t zoo_fingerprint) {
  const auto& c = p.config();
  os << kCheckpointTag << ' ' << kCheckpointVersion << '\n';
  os << "sampler " << to_string(c.sampler) << '\n';
  os << "length " << c.length << '\n';
  os << "zoo " << c.model_count << ' ' << format_hex64(zoo_fingerprint) << '\n';
  os << "noise " << format_double(c.noise.beta_min()) << ' ' << format_double(c.noise.beta_max()) << ' '
     << format_double(c.noise.horizon()) << ' ' << format_double(c.t_end) << ' ' << format_double(c.time_scale) << '\n';
  os << "dims " << c.model_embed_dim << ' ' << c.timestep_embed_dim << ' ' << c.solver_embed_dim << ' '
     << c.hidden_size << ' ' << c.recurrent_layers << ' ' << c.head_layers << ' ' << c.head_width << '\n';
  const auto params = p.params();
  os << "params " << params.size() << '\n';
  for (const auto* t : params) {
    const auto& v = t->values();
    os << "param " << t->name() << ' ' << v.rows() << ' ' << v.cols() << '\n';
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << format_double(v.data()[i]);
    os << '\n';
  }
  os << "end\n";
  if (!os) throw IoError("failed writing checkpoint");
}

inline void save_checkpoint(const std::string& path, SchedulePredictor& p, std::uint64_t zoo_fingerprint) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  save_checkpoint(f, p, zoo_fingerprint);
}

inline Checkpoint load_checkpoint(std::istream& is, const std::string& source = "<checkpoint>") {
  LineReader in(is, source);
  auto head = in.next(kCheckpointTag, 1);
  if (in.number<int>(head[1]) != kCheckpointVersion) {
    throw IncompatibleCheckpoint("unsupported checkpoint version " + std::string(head[1]));
  }
  PredictorConfig cfg;
  auto s = in.next("sampler", 1);
  try {
    cfg.sampler = parse_sampler_kind(s[1]);
  } catch (const Error& e) {
    in.fail(in.column(s[1]), e.what());
  }
  cfg.length = in.number<std::size_t>(in.next("length", 1)[1]);
  auto z = in.next("zoo", 2);
  cfg.model_count = in.number<std::size_t>(z[1]);
  Checkpoint ck;
  ck.zoo_fingerprint = in.number<std::uint64_t>(z[2], 16);
  auto n = in.next("noise", 5);
  cfg.noise = NoiseSchedule(in.number<double>(n[1]), in.number<double>(n[2]), in.number<double>(n[3]));
  cfg.t_end = in.number<double>(n[4]);
  cfg.time_scale = in.number<double>(n[5]);
  auto d = in.next("dims", 7);
  std::size_t* dims[] = {&cfg.model_embed_dim, &cfg.timestep_embed_dim, &cfg.solver_embed_dim, &cfg.hidden_size,
                         &cfg.recurrent_layers, &cfg.head_layers, &cfg.head_width};
  for (std::size_t k = 0; k < 7; ++k) *dims[k] = in.number<std::size_t>(d[k + 1]);

  ck.predictor = std::make_unique<SchedulePredictor>(cfg, 0);
  const auto params = ck.predictor->params();
  const auto count = in.number<std::size_t>(in.next("params", 1)[1]);
  if (count != params.size()) in.fail(1, "expected " + std::to_string(params.size()) + " params for this configuration");
  for (auto* t : params) {
    auto h = in.next("param", 3);
    auto& v = t->values();
    if (h[1] != t->name()) in.fail(in.column(h[1]), "expected param '" + t->name() + "'");
    if (in.number<Eigen::Index>(h[2]) != v.rows() || in.number<Eigen::Index>(h[3]) != v.cols()) {
      in.fail(in.column(h[2]), "shape mismatch for '" + t->name() + "'");
    }
    auto vals = in.raw();
    if (static_cast<Eigen::Index>(vals.size()) != v.size()) {
      in.fail(1, "expected " + std::to_string(v.size()) + " values for '" + t->name() + "'");
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double x = in.number<double>(vals[static_cast<std::size_t>(i)]);
      if (!std::isfinite(x)) in.fail(in.column(vals[static_cast<std::size_t>(i)]), "non-finite parameter");
      v.data()[i] = x;
    }
  }
  in.next("end", 0);
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(f, path);
}

}  // namespace msched
