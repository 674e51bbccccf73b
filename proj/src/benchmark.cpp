// SPDX-License-Identifier: Apache-2.0
#include "slicekit/benchmark.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "slicekit/error.hpp"
#include "slicekit/wire.hpp"

namespace slicekit {
namespace {

constexpr const char* kRecordsHeader = "# slicekit-bench v1";

std::int64_t monotonic_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now().time_since_epoch())
      .count();
}

template <class Fn>
double median_time_us(int reps, Fn&& fn) {
  for (int i = 0; i < kWarmupRuns; ++i) fn();
  std::vector<double> samples;
  samples.reserve(reps);
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    samples.push_back(elapsed_us(t0));
  }
  return median(std::move(samples));
}

char kind_code(SplitKind k) {
  switch (k) {
    case SplitKind::kFullOffload: return 'F';
    case SplitKind::kInterior: return 'S';
    case SplitKind::kLocalOnly: return 'L';
  }
  return '?';
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_num(const std::string& tok, int line, const char* field) {
  T v{};
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError("records line " + std::to_string(line) + ": bad " + field + " '" + tok + "'");
  }
  return v;
}

std::string wall_clock_iso8601() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void validate(const ResourceProfile& p) {
  if (!(p.compute_scale >= 1.0) || !std::isfinite(p.compute_scale)) {
    throw InvalidArgument("resource profile '" + p.name + "': compute_scale must be >= 1, got " +
                          fmt_double(p.compute_scale));
  }
}

void spin_for_us(double us) {
  if (us <= 0) return;
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::micro>(us));
  while (Clock::now() < deadline) {
  }
}

Tensor execute_layer(const Layer& layer, const Tensor& input, const ResourceProfile& profile) {
  const auto t0 = Clock::now();
  Tensor out = forward(layer, input);
  if (profile.compute_scale > 1.0) spin_for_us((profile.compute_scale - 1.0) * elapsed_us(t0));
  return out;
}

Tensor execute(const LayerGraph& graph, int begin, int end, const Tensor& input,
               const ResourceProfile& profile) {
  Tensor x = input;
  for (int i = begin; i < end; ++i) x = execute_layer(graph.layers[i], x, profile);
  return x;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  if (values.size() % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::clamp(p, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return values[lo] + (values[hi] - values[lo]) * (rank - static_cast<double>(lo));
}

const BenchmarkRecord& BenchmarkSet::at_split(int split_index) const {
  for (const auto& r : records) {
    if (r.split_index == split_index) return r;
  }
  throw InvalidSplit("no benchmark record for split " + std::to_string(split_index));
}

SerializationTiming measure_serialization(const Tensor& t, int reps, const std::string& model_id) {
  if (reps < kMinRepetitions) {
    throw InvalidArgument("reps must be >= " + std::to_string(kMinRepetitions));
  }
  const wire::Frame frame = wire::make_request(0, model_id, 0, t);
  std::vector<std::uint8_t> buf;
  const double ser = median_time_us(reps, [&] {
    buf.clear();
    wire::encode_into(frame, buf);
  });
  const double de = median_time_us(reps, [&] {
    const auto d = wire::decode(buf);
    if (d.frame.payload.size() != t.size()) throw ShapeMismatch("decode lost payload");
  });
  return {ser, de, buf.size()};
}

BenchmarkSet benchmark_model(const LayerGraph& graph, const ResourceProfile& device,
                             const ResourceProfile& edge, const Tensor& input, int reps) {
  if (!Clock::is_steady) throw ClockError("steady clock is not monotonic on this platform");
  if (reps < kMinRepetitions) {
    throw InvalidArgument("reps must be >= " + std::to_string(kMinRepetitions) + ", got " +
                          std::to_string(reps));
  }
  validate(device);
  validate(edge);
  validate(graph);
  if (!(input.shape() == graph.input_shape)) {
    throw ShapeError(graph.name + " expects input " + graph.input_shape.str() + ", got " +
                     input.shape().str());
  }

  const int n = static_cast<int>(graph.size());
  BenchmarkSet set{graph.name, n, device.name, edge.name, {}};
  const Layer device_tl{DeviceTL{}, {}};
  const Layer edge_tl{EdgeTL{}, {}};

  // Boundary tensors and the timed operations of every split point.
  struct Probe {
    SplitPoint sp;
    Tensor boundary;
    Tensor down;
    std::vector<double> head, tail, dtl, etl;
  };
  std::vector<Probe> probes;
  for (const SplitPoint& sp : enumerate_split_points(graph)) {
    Probe p{sp, run_units(graph, 0, sp.index + 1, input), {}, {}, {}, {}, {}};
    if (sp.tl_eligible) p.down = max_pool_2x2(p.boundary);
    probes.push_back(std::move(p));
  }

  auto time_us = [](auto&& fn) {
    const auto t0 = Clock::now();
    fn();
    return elapsed_us(t0);
  };
  auto sample = [&](Probe& p) {
    const int head_end = p.sp.index + 1;
    if (head_end > 0) p.head.push_back(time_us([&] { execute(graph, 0, head_end, input, device); }));
    if (p.sp.kind != SplitKind::kLocalOnly) {
      p.tail.push_back(time_us([&] { execute(graph, head_end, n, p.boundary, edge); }));
    }
    if (p.sp.tl_eligible) {
      p.dtl.push_back(time_us([&] { execute_layer(device_tl, p.boundary, device); }));
      p.etl.push_back(time_us([&] { execute_layer(edge_tl, p.down, edge); }));
    }
  };

  // Repetitions run round-robin over split points so slow drift in host
  // speed affects every split alike.
  for (int w = 0; w < kWarmupRuns; ++w) {
    for (Probe& p : probes) sample(p);
  }
  for (Probe& p : probes) p.head.clear(), p.tail.clear(), p.dtl.clear(), p.etl.clear();
  for (int r = 0; r < reps; ++r) {
    for (Probe& p : probes) sample(p);
  }

  for (Probe& p : probes) {
    BenchmarkRecord rec;
    rec.split_index = p.sp.index;
    rec.kind = p.sp.kind;
    rec.tl_eligible = p.sp.tl_eligible;
    rec.repetitions = reps;
    rec.device_head_time_us = median(p.head);
    rec.edge_tail_time_us = median(p.tail);
    rec.device_tl_time_us = median(p.dtl);
    rec.edge_tl_time_us = median(p.etl);
    if (p.sp.kind != SplitKind::kLocalOnly) {
      const auto s = measure_serialization(p.boundary, reps, graph.name);
      rec.serialize_time_us = s.serialize_time_us;
      rec.deserialize_time_us = s.deserialize_time_us;
      rec.payload_bytes_no_tl = s.bytes;
    }
    if (p.sp.tl_eligible) {
      const auto s = measure_serialization(p.down, reps, graph.name);
      rec.serialize_tl_time_us = s.serialize_time_us;
      rec.deserialize_tl_time_us = s.deserialize_time_us;
      rec.payload_bytes_tl = s.bytes;
    }
    rec.timestamp = monotonic_us();
    set.records.push_back(rec);
  }
  return set;
}

std::string format_records(const BenchmarkSet& set) {
  std::ostringstream os;
  os << kRecordsHeader << '\n';
  os << "# model " << set.model << '\n';
  os << "# units " << set.units << '\n';
  os << "# device " << set.device_profile << '\n';
  os << "# edge " << set.edge_profile << '\n';
  os << "# created " << wall_clock_iso8601() << '\n';
  os << "# split kind tl_eligible device_head_us edge_tail_us device_tl_us edge_tl_us "
        "serialize_us deserialize_us serialize_tl_us deserialize_tl_us payload_bytes_no_tl "
        "payload_bytes_tl repetitions timestamp\n";
  for (const auto& r : set.records) {
    os << r.split_index << ' ' << kind_code(r.kind) << ' ' << (r.tl_eligible ? 1 : 0) << ' '
       << fmt_double(r.device_head_time_us) << ' ' << fmt_double(r.edge_tail_time_us) << ' '
       << fmt_double(r.device_tl_time_us) << ' ' << fmt_double(r.edge_tl_time_us) << ' '
       << fmt_double(r.serialize_time_us) << ' ' << fmt_double(r.deserialize_time_us) << ' '
       << fmt_double(r.serialize_tl_time_us) << ' ' << fmt_double(r.deserialize_tl_time_us) << ' '
       << r.payload_bytes_no_tl << ' ' << r.payload_bytes_tl << ' ' << r.repetitions << ' '
       << r.timestamp << '\n';
  }
  return os.str();
}

BenchmarkSet parse_records(const std::string& text) {
  BenchmarkSet set;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  bool saw_units = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string key, value;
      meta >> key >> value;
      if (key.rfind("slicekit-bench", 0) == 0) {
        if (line != kRecordsHeader) throw VersionMismatch("records: unsupported header '" + line + "'");
        saw_header = true;
      } else if (key == "model") {
        set.model = value;
      } else if (key == "units") {
        set.units = parse_num<int>(value, line_no, "units");
        saw_units = true;
      } else if (key == "device") {
        set.device_profile = value;
      } else if (key == "edge") {
        set.edge_profile = value;
      }
      continue;
    }
    if (!saw_header) throw ParseError("records line " + std::to_string(line_no) + ": missing version header");
    std::istringstream row(line);
    std::vector<std::string> t;
    for (std::string tok; row >> tok;) t.push_back(tok);
    if (t.size() != 15) {
      throw ParseError("records line " + std::to_string(line_no) + ": expected 15 columns, got " +
                       std::to_string(t.size()));
    }
    BenchmarkRecord r;
    r.split_index = parse_num<int>(t[0], line_no, "split");
    if (t[1] == "F") r.kind = SplitKind::kFullOffload;
    else if (t[1] == "S") r.kind = SplitKind::kInterior;
    else if (t[1] == "L") r.kind = SplitKind::kLocalOnly;
    else throw ParseError("records line " + std::to_string(line_no) + ": bad kind '" + t[1] + "'");
    const int eligible = parse_num<int>(t[2], line_no, "tl_eligible");
    if (eligible != 0 && eligible != 1) {
      throw ParseError("records line " + std::to_string(line_no) + ": tl_eligible must be 0 or 1");
    }
    r.tl_eligible = eligible == 1;
    double* times[] = {&r.device_head_time_us,  &r.edge_tail_time_us,   &r.device_tl_time_us,
                       &r.edge_tl_time_us,      &r.serialize_time_us,   &r.deserialize_time_us,
                       &r.serialize_tl_time_us, &r.deserialize_tl_time_us};
    for (int i = 0; i < 8; ++i) {
      *times[i] = parse_num<double>(t[3 + i], line_no, "time");
      if (!(*times[i] >= 0) || !std::isfinite(*times[i])) {
        throw ParseError("records line " + std::to_string(line_no) + ": negative or non-finite time");
      }
    }
    r.payload_bytes_no_tl = parse_num<std::uint64_t>(t[11], line_no, "payload_bytes_no_tl");
    r.payload_bytes_tl = parse_num<std::uint64_t>(t[12], line_no, "payload_bytes_tl");
    r.repetitions = parse_num<int>(t[13], line_no, "repetitions");
    r.timestamp = parse_num<std::int64_t>(t[14], line_no, "timestamp");
    if (r.repetitions < kMinRepetitions) {
      throw ParseError("records line " + std::to_string(line_no) + ": repetitions " +
                       std::to_string(r.repetitions) + " below floor of " +
                       std::to_string(kMinRepetitions));
    }
    if (r.tl_eligible && r.payload_bytes_tl > r.payload_bytes_no_tl) {
      throw ParseError("records line " + std::to_string(line_no) +
                       ": TL payload larger than uncompressed payload");
    }
    set.records.push_back(r);
  }
  if (!saw_header) throw ParseError("records: missing version header");
  if (!saw_units) throw ParseError("records: missing '# units' line");
  return set;
}

void save_records(const BenchmarkSet& set, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  f << format_records(set);
  if (!f) throw IoError("cannot write " + path.string());
}

BenchmarkSet load_records(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open records " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_records(ss.str());
}

}  // namespace slicekit
