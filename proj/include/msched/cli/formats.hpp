#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "msched/dpmlab/denoiser.hpp"
#include "msched/errors.hpp"
#include "msched/predictor/ranking.hpp"
#include "msched/schedspace/schedule.hpp"
#include "msched/schedspace/zoo.hpp"
#include "msched/textio.hpp"

namespace msched::cli {

// Zoo file:
//   id name latency_ms
//   1 small 1.0 kind=perturbed bias=0.3:0.02:1
//   2 large 2.5 kind=perturbed bias=0.02:0.05:4 error=0.1:0.08:1
// '#' lines and blank lines are ignored. Trailing key=value fields describe the lab
// denoiser (kind, bias, gain, dir, width) and the synthetic oracle (error).
inline constexpr std::string_view kZooHeader = "id name latency_ms";
inline constexpr std::string_view kDatasetHeader = "sampler L entries quality family";

struct ModelMeta {
  lab::DenoiserKind kind = lab::DenoiserKind::exact;
  lab::Profile bias;
  lab::Profile gain;
  std::vector<double> direction;
  std::size_t width = 64;
  std::optional<lab::Profile> error;
};

struct ZooFile {
  ModelZoo zoo;
  std::vector<ModelMeta> meta;  // meta[id - 1]
};

namespace detail {

inline void expect_header(LineReader& in, std::span<const std::string_view> toks, std::string_view header) {
  std::istringstream want{std::string(header)};
  std::string w;
  std::size_t k = 0;
  while (want >> w) {
    if (k >= toks.size() || toks[k] != w) {
      in.fail(k < toks.size() ? in.column(toks[k]) : 1, "expected header '" + std::string(header) + "'");
    }
    ++k;
  }
  if (k != toks.size()) in.fail(in.column(toks[k]), "unexpected field after header");
}

inline std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t b = 0;
  while (true) {
    const auto e = s.find(sep, b);
    out.push_back(s.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
    if (e == std::string_view::npos) break;
    b = e + 1;
  }
  return out;
}

inline lab::Profile parse_profile(LineReader& in, std::string_view tok) {
  const auto parts = split_on(tok, ':');
  if (parts.size() < 2 || parts.size() > 3) in.fail(in.column(tok), "profile must be at_data:at_noise[:power]");
  lab::Profile p{in.number<double>(parts[0]), in.number<double>(parts[1]), 1.0};
  if (parts.size() == 3) p.power = in.number<double>(parts[2]);
  if (!(p.power > 0.0)) in.fail(in.column(parts.back()), "profile power must be positive");
  return p;
}

inline std::vector<int> parse_entries(LineReader& in, std::string_view tok) {
  std::vector<int> out;
  for (auto part : split_on(tok, ',')) {
    if (part.empty()) in.fail(in.column(part), "empty schedule entry");
    const int e = in.number<int>(part);
    if (e < 0) in.fail(in.column(part), "negative model id");
    out.push_back(e);
  }
  return out;
}

/// Parses "sampler L entries" starting at toks[0].
inline ModelSchedule parse_schedule_fields(LineReader& in, std::span<const std::string_view> toks) {
  ModelSchedule q;
  try {
    q.sampler = parse_sampler_kind(toks[0]);
  } catch (const ConfigError& e) {
    in.fail(in.column(toks[0]), e.what());
  }
  const auto length = in.number<std::size_t>(toks[1]);
  q.entries = parse_entries(in, toks[2]);
  if (q.entries.size() != length) {
    in.fail(in.column(toks[2]), "expected " + std::to_string(length) + " entries, got " + std::to_string(q.entries.size()));
  }
  if (q.sampler == SamplerKind::dpm_solver && length % kSolverGroup != 0) {
    in.fail(in.column(toks[1]), "dpm-solver length must be divisible by 3");
  }
  return q;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  return f;
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  return f;
}

}  // namespace detail

inline ZooFile read_zoo(std::istream& is, const std::string& source = "<zoo>") {
  LineReader in(is, source);
  std::vector<std::string_view> toks;
  if (!in.next_record(toks)) in.fail(1, "missing header '" + std::string(kZooHeader) + "'");
  detail::expect_header(in, toks, kZooHeader);

  std::vector<ZooModel> models;
  std::vector<ModelMeta> meta;
  while (in.next_record(toks)) {
    if (toks.size() < 3) in.fail(1, "expected 'id name latency_ms'");
    ZooModel m;
    m.id = in.number<int>(toks[0]);
    if (m.id != static_cast<int>(models.size()) + 1) {
      in.fail(in.column(toks[0]), "ids must run 1..N in order; expected " + std::to_string(models.size() + 1));
    }
    m.name = std::string(toks[1]);
    m.latency_ms = in.number<double>(toks[2]);
    if (!(m.latency_ms > 0.0) || !std::isfinite(m.latency_ms)) in.fail(in.column(toks[2]), "latency must be positive");

    ModelMeta mm;
    bool has_kind = false;
    for (std::size_t k = 3; k < toks.size(); ++k) {
      const auto tok = toks[k];
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos || eq == 0) in.fail(in.column(tok), "expected key=value");
      const auto key = tok.substr(0, eq);
      const auto val = tok.substr(eq + 1);
      if (key == "kind") {
        try {
          mm.kind = lab::parse_denoiser_kind(std::string(val));
        } catch (const ConfigError& e) {
          in.fail(in.column(val), e.what());
        }
        has_kind = true;
      } else if (key == "bias") {
        mm.bias = detail::parse_profile(in, val);
      } else if (key == "gain") {
        mm.gain = detail::parse_profile(in, val);
      } else if (key == "error") {
        mm.error = detail::parse_profile(in, val);
      } else if (key == "width") {
        mm.width = in.number<std::size_t>(val);
        if (!mm.width) in.fail(in.column(val), "width must be positive");
      } else if (key == "dir") {
        for (auto part : detail::split_on(val, ',')) mm.direction.push_back(in.number<double>(part));
      } else {
        in.fail(in.column(tok), "unknown key '" + std::string(key) + "'");
      }
      if (!m.metadata.empty()) m.metadata += ' ';
      m.metadata += std::string(tok);
    }
    if (!has_kind && (!mm.bias.is_zero() || !mm.gain.is_zero())) mm.kind = lab::DenoiserKind::perturbed;
    models.push_back(std::move(m));
    meta.push_back(std::move(mm));
  }
  if (models.empty()) throw ParseError(source, in.line_number(), 0, "zoo lists no models");
  return {ModelZoo(std::move(models)), std::move(meta)};
}

inline ZooFile read_zoo(const std::string& path) {
  auto f = detail::open_for_read(path);
  return read_zoo(f, path);
}

inline void write_zoo(std::ostream& os, const ModelZoo& zoo) {
  os << kZooHeader << '\n';
  for (const auto& m : zoo.models()) {
    os << m.id << ' ' << m.name << ' ' << format_double(m.latency_ms);
    if (!m.metadata.empty()) os << ' ' << m.metadata;
    os << '\n';
  }
}

// Dataset file: header, then one "sampler L s1,...,sL quality family" per line. An
// empty family is written as '-'.
inline void write_dataset(std::ostream& os, std::span<const ScheduleRecord> records) {
  os << kDatasetHeader << '\n';
  for (const auto& r : records) {
    os << to_string(r.schedule.sampler) << ' ' << r.schedule.length() << ' ' << format_entries(r.schedule) << ' '
       << format_double(r.quality) << ' ' << (r.family.empty() ? "-" : r.family) << '\n';
  }
  if (!os) throw IoError("failed writing dataset");
}

inline void write_dataset(const std::string& path, std::span<const ScheduleRecord> records) {
  auto f = detail::open_for_write(path);
  write_dataset(f, records);
}

inline std::vector<ScheduleRecord> read_dataset(std::istream& is, const std::string& source = "<dataset>") {
  LineReader in(is, source);
  std::vector<std::string_view> toks;
  if (!in.next_record(toks)) in.fail(1, "missing header '" + std::string(kDatasetHeader) + "'");
  detail::expect_header(in, toks, kDatasetHeader);
  std::vector<ScheduleRecord> out;
  while (in.next_record(toks)) {
    if (toks.size() != 5) in.fail(1, "expected 5 fields, got " + std::to_string(toks.size()));
    ScheduleRecord r;
    r.schedule = detail::parse_schedule_fields(in, toks);
    r.quality = in.number<double>(toks[3]);
    if (toks[4] != "-") r.family = std::string(toks[4]);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ScheduleRecord> read_dataset(const std::string& path) {
  auto f = detail::open_for_read(path);
  return read_dataset(f, path);
}

// Schedule file: one "sampler L s1,...,sL" per line, no header.
inline void write_schedules(std::ostream& os, std::span<const ModelSchedule> qs) {
  for (const auto& q : qs) os << to_string(q.sampler) << ' ' << q.length() << ' ' << format_entries(q) << '\n';
}

inline std::vector<ModelSchedule> read_schedules(std::istream& is, const std::string& source = "<schedules>") {
  LineReader in(is, source);
  std::vector<std::string_view> toks;
  std::vector<ModelSchedule> out;
  while (in.next_record(toks)) {
    if (toks.size() != 3) in.fail(1, "expected 'sampler L entries'");
    out.push_back(detail::parse_schedule_fields(in, toks));
  }
  return out;
}

inline std::vector<ModelSchedule> read_schedules(const std::string& path) {
  auto f = detail::open_for_read(path);
  return read_schedules(f, path);
}

}  // namespace msched::cli
