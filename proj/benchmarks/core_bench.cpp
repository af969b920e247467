// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>
#include <unistd.h>

#include <random>

#include "promptseg/contour.hpp"
#include "promptseg/embedding_policy.hpp"
#include "promptseg/protocol/frame.hpp"
#include "promptseg/protocol/shm.hpp"

namespace promptseg {
namespace {

Bitmask disc(int n, int r) {
  Bitmask m(n, n);
  const int c = n / 2;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if ((x - c) * (x - c) + (y - c) * (y - c) <= r * r) m.set(x, y);
  return m;
}

void BM_MaskToPolygon(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const MaskResult m({0, 0, n, n}, disc(n, n / 3), 1.0, Prompt::point(n / 2, n / 2, {}));
  for (auto _ : state) benchmark::DoNotOptimize(mask_to_polygon(m));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_MaskToPolygon)->Arg(256)->Arg(1024);

void BM_RasterizePolygon(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Polygon p = mask_to_polygon(MaskResult({0, 0, n, n}, disc(n, n / 3), 1.0, Prompt::point(0, 0, {})));
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_polygon(p, {0, 0, n, n}));
}
BENCHMARK(BM_RasterizePolygon)->Arg(256)->Arg(1024);

void BM_EmbeddingRegion(benchmark::State& state) {
  std::mt19937 rng(1);
  std::uniform_int_distribution<int> coord(0, 3000);
  std::vector<Prompt> prompts;
  for (int i = 0; i < 1024; ++i) {
    prompts.push_back(Prompt::box_prompt({coord(rng), coord(rng), 1 + coord(rng) % 900, 1 + coord(rng) % 900},
                                         {0, 0, 4000, 4000}));
  }
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(embedding_region(4000, 4000, prompts[i++ % prompts.size()]));
}
BENCHMARK(BM_EmbeddingRegion);

protocol::ControlMessage decode_request() {
  protocol::ControlMessage m;
  m.msg_id = 12345;
  m.kind = protocol::MessageKind::Decode;
  m.embedding_handle = "emb-17";
  m.region = Region{100, 200, 1024, 768};
  protocol::ModelPrompt p;
  p.points = {{512.5, 384.25, true}, {10.0, 20.0, false}};
  m.prompt = p;
  m.scale = ScalePair{1.0, 1.0};
  m.output = protocol::TensorHeader{protocol::DType::U8, {768, 1024}, 0, "promptseg-1-12345-mask"};
  return m;
}

void BM_FrameEncode(benchmark::State& state) {
  const auto m = decode_request();
  for (auto _ : state) benchmark::DoNotOptimize(protocol::encode_frame(m));
}
BENCHMARK(BM_FrameEncode);

void BM_FrameDecode(benchmark::State& state) {
  const std::string wire = protocol::encode_frame(decode_request());
  for (auto _ : state) benchmark::DoNotOptimize(protocol::decode_frame(wire));
}
BENCHMARK(BM_FrameDecode);

void BM_Crc32(benchmark::State& state) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(protocol::crc32(buf));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Crc32)->Arg(1 << 20);

void BM_ShmWriteRead(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  std::vector<std::uint8_t> px(side * side * 3, 7);
  const std::string name = "promptseg-bench-" + std::to_string(::getpid());
  for (auto _ : state) {
    const auto w = protocol::shm_write(name, protocol::DType::U8, {side, side, 3}, px);
    benchmark::DoNotOptimize(protocol::shm_read(w.header));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(px.size()));
}
BENCHMARK(BM_ShmWriteRead)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace promptseg
