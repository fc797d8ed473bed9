#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

#include "sct/inference.hpp"
#include "sct/phantom.hpp"
#include "sct/pipeline.hpp"
#include "sct/volume_io.hpp"
#include "test_util.hpp"

using namespace sct;

namespace {

ModelSpec spec_of(std::size_t slices = 3) {
  ModelSpec s;
  s.in_channels = slices;
  s.depth = 2;
  s.base_width = 4;
  return s;
}

Checkpoint make_checkpoint(Task task, std::uint64_t seed = 3) {
  TrainConfig cfg;
  cfg.task = task;
  Checkpoint ck{Model<float>::build(spec_of(), seed), source_settings(cfg), hu_window(), cfg, 0, 0.0};
  return ck;
}

// Zeroed head: every output is sigmoid(0) = 0.5.
Checkpoint stub_checkpoint() {
  auto ck = make_checkpoint(Task::MriToCt);
  for (const char* n : {"head.weight", "head.bias"}) {
    auto v = ck.model.parameter(n).values();
    std::fill(v.begin(), v.end(), 0.0f);
  }
  return ck;
}

CaseRecord phantom_case(std::uint64_t seed, Dims dims, SourceMode mode = SourceMode::Mri) {
  auto s = default_phantom(mode);
  s.dims = dims;
  s.seed = seed;
  s.case_id = "case" + std::to_string(seed);
  return generate(s);
}

} // namespace

TEST_CASE("stub model gives 1023.5 HU inside the mask and -1024 outside") {
  const auto ck = stub_checkpoint();
  const auto c = phantom_case(1, {12, 10, 3});
  const auto r = synthesize(ck, c.source, c.mask);
  CHECK(r.sct.dims() == c.source.dims());
  CHECK(r.sct.unit() == Unit::HU);
  for (std::size_t i = 0; i < r.sct.size(); ++i)
    CHECK(r.sct.voxels()[i] == (c.mask.voxels()[i] > 0.0f ? 1023.5f : -1024.0f));
  const auto unmasked = synthesize(ck, c.source);
  for (float v : unmasked.sct.voxels()) CHECK(v == 1023.5f);
}

TEST_CASE("output dims follow the input for any depth") {
  const auto ck = make_checkpoint(Task::MriToCt);
  for (std::size_t nz : {1u, 2u, 5u}) {
    const auto c = phantom_case(nz, {9, 7, nz});
    CHECK(synthesize(ck, c.source, c.mask).sct.dims() == c.source.dims());
  }
}

TEST_CASE("synthesize equals a hand-rolled slab loop") {
  const auto ck = make_checkpoint(Task::MriToCt, 21);
  const auto c = phantom_case(5, {13, 11, 3});
  const auto r = synthesize(ck, c.source, c.mask);

  const auto params = fit_percentile_linear(c.source, c.mask, 1.0, 99.0);
  const Volume norm = apply_normalization(c.source, params);
  const std::size_t nx = 13, ny = 11, ph = 12, pw = 16;
  const std::size_t top = (ph - ny) / 2, left = (pw - nx) / 2;
  auto refl = [](std::ptrdiff_t i, std::size_t n) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    while (i < 0 || i >= m) i = i < 0 ? -i : 2 * (m - 1) - i;
    return static_cast<std::size_t>(i);
  };
  ad::NoGradGuard guard;
  for (std::size_t z = 0; z < 3; ++z) {
    const Slab s = extract_slab(norm, z, 3);
    std::vector<float> padded(3 * ph * pw);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t y = 0; y < ph; ++y)
        for (std::size_t x = 0; x < pw; ++x)
          padded[(k * ph + y) * pw + x] =
              s.data[(k * ny + refl(static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(top), ny)) * nx +
                     refl(static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(left), nx)];
    const auto out = ck.model.forward(ad::Tensor<float>::from({1, 3, ph, pw}, padded));
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        const double hu = -1024.0 + static_cast<double>(out.values()[(y + top) * pw + x + left]) * 4095.0;
        const double expect = c.mask.at(x, y, z) > 0.0f ? hu : -1024.0;
        CHECK(std::abs(r.sct.at(x, y, z) - expect) <= 1e-5 * 4095.0);
      }
  }
}

TEST_CASE("synthesis is deterministic and within the HU window") {
  const auto ck = make_checkpoint(Task::MriToCt, 8);
  const auto c = phantom_case(2, {16, 16, 4});
  const auto a = synthesize(ck, c.source, c.mask);
  const auto b = synthesize(ck, c.source, c.mask, {-1024.0f, 1});
  CHECK(a.sct == b.sct);
  for (float v : a.sct.voxels()) {
    CHECK(v >= -1024.0f);
    CHECK(v <= 3071.0f);
  }
}

TEST_CASE("CBCT uses the stored window and rejects mismatched units") {
  const auto ck = make_checkpoint(Task::CbctToCt);
  const auto cbct = phantom_case(3, {8, 8, 2}, SourceMode::Cbct);
  CHECK(cbct.source.unit() == Unit::HU);
  CHECK(synthesize(ck, cbct.source, cbct.mask).sct.dims() == cbct.source.dims());
  const auto mri = phantom_case(3, {8, 8, 2});
  CHECK_ERROR_CODE(synthesize(ck, mri.source, mri.mask), ErrorCode::TaskMismatch);
  CHECK_ERROR_CODE(synthesize(make_checkpoint(Task::MriToCt), cbct.source, cbct.mask), ErrorCode::TaskMismatch);
  CHECK_ERROR_CODE(synthesize(make_checkpoint(Task::MriToCt), mri.source, Volume::filled({8, 8, 3}, 1.0f, Unit::Binary)),
                   ErrorCode::DimMismatch);
}

TEST_CASE("batch prediction over a case directory") {
  test::TempDir root("batch");
  const auto ckpt = root.path() / "model.ckpt";
  save_checkpoint(ckpt, make_checkpoint(Task::MriToCt));
  const auto cases = root.path() / "cases";
  const auto out = root.path() / "out";
  std::filesystem::create_directories(cases);

  SUBCASE("empty directory") {
    const auto rep = batch_predict(ckpt, cases, out);
    CHECK(rep.written.empty());
    CHECK(rep.failures.empty());
    std::ifstream in(out / "predict_manifest.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j["outputs"].empty());
    CHECK(j["checkpoint_hash"] == content_hash(read_file(ckpt)));
  }
  SUBCASE("three valid cases") {
    for (std::uint64_t s : {1u, 2u, 3u}) save_case(cases, phantom_case(s, {8, 8, 2}));
    const auto rep = batch_predict(ckpt, cases, out);
    CHECK(rep.written.size() == 3);
    CHECK(rep.failures.empty());
    for (std::uint64_t s : {1u, 2u, 3u})
      CHECK(std::filesystem::exists(out / ("case" + std::to_string(s) + "_sct.mha")));
  }
  SUBCASE("one corrupt case among three") {
    for (std::uint64_t s : {1u, 2u, 3u}) save_case(cases, phantom_case(s, {8, 8, 2}));
    write_text(cases / "case2_source.mha", "NDims = 3\nnot a header");
    const auto rep = batch_predict(ckpt, cases, out);
    CHECK(rep.written.size() == 2);
    REQUIRE(rep.failures.size() == 1);
    CHECK(rep.failures[0].case_id == "case2");
    std::ifstream in(out / "predict_manifest.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j["failures"].size() == 1);
    CHECK(j["outputs"].size() == 2);
  }
  SUBCASE("missing checkpoint") {
    CHECK_ERROR_CODE(batch_predict(root.path() / "nope.ckpt", cases, out), ErrorCode::MissingPath);
  }
}
