// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "slicekit/benchmark.hpp"
#include "slicekit/error.hpp"
#include "slicekit/wire.hpp"
#include "test_util.hpp"

namespace slicekit {
namespace {

namespace fs = std::filesystem;

BenchmarkSet bench(const std::string& model, double device_scale = 1.0, int reps = kMinRepetitions) {
  const LayerGraph g = make_synthetic_model(model, 7);
  Rng rng(1);
  return benchmark_model(g, ResourceProfile{"device", device_scale}, ResourceProfile{"edge", 1.0},
                         testing::random_tensor(g.input_shape, rng), reps);
}

TEST(Benchmark, RejectsTooFewRepetitions) {
  const LayerGraph g = make_synthetic_model("tiny-cnn-8", 7);
  EXPECT_THROW(benchmark_model(g, {}, {}, Tensor(g.input_shape), 5), InvalidArgument);
}

TEST(Benchmark, RejectsScaleBelowOne) {
  const LayerGraph g = make_synthetic_model("tiny-cnn-8", 7);
  EXPECT_THROW(benchmark_model(g, {"d", 0.5}, {}, Tensor(g.input_shape), 20), InvalidArgument);
}

TEST(Benchmark, OneRecordPerSplitWithSentinels) {
  const BenchmarkSet set = bench("tiny-cnn-8");
  const LayerGraph g = make_synthetic_model("tiny-cnn-8", 7);
  const auto sps = enumerate_split_points(g);
  ASSERT_EQ(set.records.size(), sps.size());
  for (std::size_t i = 0; i < sps.size(); ++i) {
    const BenchmarkRecord& r = set.records[i];
    EXPECT_EQ(r.split_index, sps[i].index);
    EXPECT_EQ(r.tl_eligible, sps[i].tl_eligible);
    EXPECT_EQ(r.repetitions, kMinRepetitions);
    if (!r.tl_eligible) {
      EXPECT_EQ(r.device_tl_time_us, 0);
      EXPECT_EQ(r.edge_tl_time_us, 0);
      EXPECT_EQ(r.payload_bytes_tl, 0u);
    } else {
      EXPECT_LT(r.payload_bytes_tl, r.payload_bytes_no_tl);
    }
  }
  const BenchmarkRecord& local = set.records.back();
  EXPECT_EQ(local.kind, SplitKind::kLocalOnly);
  EXPECT_EQ(local.payload_bytes_no_tl, 0u);
  EXPECT_EQ(local.payload_bytes_tl, 0u);
  EXPECT_EQ(local.edge_tail_time_us, 0);
  EXPECT_EQ(local.edge_tl_time_us, 0);
  EXPECT_EQ(set.records.front().device_head_time_us, 0);
}

TEST(Benchmark, PayloadBytesMatchFrameSize) {
  const LayerGraph g = make_synthetic_model("branchy-12", 7);
  Rng rng(2);
  const BenchmarkSet set = benchmark_model(g, {}, {}, testing::random_tensor(g.input_shape, rng), 20);
  for (const auto& sp : enumerate_split_points(g)) {
    if (sp.kind == SplitKind::kLocalOnly) continue;
    const BenchmarkRecord& r = set.at_split(sp.index);
    EXPECT_EQ(r.payload_bytes_no_tl, wire::tensor_frame_size(g.name.size(), sp.output_shape));
    EXPECT_EQ(r.payload_bytes_no_tl, sp.output_bytes);
  }
}

TEST(Benchmark, ScaledHeadPlusTailPartitionsLocalTime) {
  constexpr double kScale = 10.0;
  const BenchmarkSet set = bench("tiny-cnn-8", kScale, 40);
  const double native_local = set.records.back().device_head_time_us / kScale;
  for (const auto& r : set.records) {
    if (r.kind == SplitKind::kLocalOnly) continue;
    const double native_sum = r.device_head_time_us / kScale + r.edge_tail_time_us;
    EXPECT_NEAR(native_sum, native_local, 0.2 * native_local) << "split " << r.split_index;
  }
}

TEST(Benchmark, TlPayloadIsAboutAQuarter) {
  const LayerGraph g{"quarter", Shape{64, 32, 32}, {Layer{ReLU{}, {}}, Layer{ReLU{}, {}}}};
  const BenchmarkSet set = benchmark_model(g, {}, {}, Tensor(g.input_shape), 20);
  const BenchmarkRecord& r = set.at_split(0);
  const double ratio = static_cast<double>(r.payload_bytes_tl) / static_cast<double>(r.payload_bytes_no_tl);
  EXPECT_GE(ratio, 0.24);
  EXPECT_LE(ratio, 0.26);
}

TEST(Benchmark, TransferLayerOverheadIsSmall) {
  for (const auto& name : synthetic_model_names()) {
    const BenchmarkSet set = bench(name);
    for (const auto& r : set.records) {
      if (!r.tl_eligible) continue;
      const double compute = r.device_head_time_us + r.edge_tail_time_us;
      EXPECT_LT(r.device_tl_time_us, 0.05 * compute) << name << " split " << r.split_index;
      EXPECT_LT(r.edge_tl_time_us, 0.05 * compute) << name << " split " << r.split_index;
    }
  }
}

TEST(Benchmark, NonTimingFieldsAreDeterministic) {
  const BenchmarkSet a = bench("branchy-12");
  const BenchmarkSet b = bench("branchy-12");
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].split_index, b.records[i].split_index);
    EXPECT_EQ(a.records[i].kind, b.records[i].kind);
    EXPECT_EQ(a.records[i].tl_eligible, b.records[i].tl_eligible);
    EXPECT_EQ(a.records[i].payload_bytes_no_tl, b.records[i].payload_bytes_no_tl);
    EXPECT_EQ(a.records[i].payload_bytes_tl, b.records[i].payload_bytes_tl);
  }
}

TEST(MeasureSerialization, ByteCounts) {
  EXPECT_EQ(measure_serialization(Tensor(Shape{1, 1, 1}), 20).bytes, wire::header_size(0) + 4);
  EXPECT_EQ(measure_serialization(Tensor(Shape{64, 28, 28}), 20).bytes,
            wire::header_size(0) + 200704);
  EXPECT_EQ(measure_serialization(Tensor(Shape{1, 1, 1}), 20, "abc").bytes,
            wire::header_size(3) + 4);
}

TEST(MeasureSerialization, TimesArePositive) {
  const auto s = measure_serialization(Tensor(Shape{16, 32, 32}), 20);
  EXPECT_GT(s.serialize_time_us, 0);
  EXPECT_GT(s.deserialize_time_us, 0);
}

TEST(Statistics, MedianAndPercentile) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(percentile({1, 2, 3, 4, 5}, 1.0), 5);
  EXPECT_EQ(percentile({1, 2, 3, 4, 5}, 0.0), 1);
}

TEST(Records, SaveLoadRoundTrip) {
  const BenchmarkSet set = bench("tiny-cnn-8");
  const fs::path p = fs::temp_directory_path() / "slicekit_records_roundtrip.txt";
  save_records(set, p);
  EXPECT_EQ(load_records(p), set);
}

TEST(Records, RejectsLowRepetitions) {
  BenchmarkSet set = bench("tiny-cnn-8");
  set.records[2].repetitions = 5;
  EXPECT_THROW(parse_records(format_records(set)), ParseError);
}

TEST(Records, RejectsWrongVersionAndGarbage) {
  std::string text = format_records(bench("tiny-cnn-8"));
  const auto pos = text.find("v1");
  ASSERT_NE(pos, std::string::npos);
  std::string v2 = text;
  v2.replace(pos, 2, "v2");
  EXPECT_THROW(parse_records(v2), VersionMismatch);
  EXPECT_THROW(parse_records(text + "1 2 3\n"), ParseError);
  EXPECT_THROW(load_records("/nonexistent/records.txt"), IoError);
}

TEST(Records, RejectsTlPayloadLargerThanPlain) {
  BenchmarkSet set = bench("tiny-cnn-8");
  set.records[1].payload_bytes_tl = set.records[1].payload_bytes_no_tl + 1;
  EXPECT_THROW(parse_records(format_records(set)), ParseError);
}

}  // namespace
}  // namespace slicekit
