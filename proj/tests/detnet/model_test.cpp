#include <gtest/gtest.h>

#include <fstream>
#include <limits>
#include <set>

#include "slapseg/common/error.hpp"
#include "slapseg/detnet/checkpoint.hpp"
#include "slapseg/detnet/model.hpp"
#include "slapseg/detnet/sgd.hpp"
#include "tempdir.hpp"

namespace slapseg::det {
namespace {

Tensor ramp_input(int h, int w) {
  Tensor x({1, h, w});
  for (int i = 0; i < h * w; ++i) x[i] = ((i * 37) % 101) / 100.0;
  return x;
}

TEST(Model, ParamNamesAndShapesLineUp) {
  const ModelParams p = init_params({}, 1);
  ASSERT_EQ(p.tensors.size(), static_cast<std::size_t>(kParamCount));
  ASSERT_EQ(param_names().size(), static_cast<std::size_t>(kParamCount));
  const std::set<std::string> unique(param_names().begin(), param_names().end());
  EXPECT_EQ(unique.size(), param_names().size());
  EXPECT_EQ(p[kRpnClsW].dim(0), AnchorConfig::kPerPosition);
  EXPECT_EQ(p[kRpnBoxW].dim(0), 4 * AnchorConfig::kPerPosition);
  EXPECT_NO_THROW(p.validate());
  std::size_t n = 0;
  for (const auto& t : p.tensors) n += t.size();
  EXPECT_EQ(p.scalar_count(), n);
}

TEST(Model, InitIsSeededAndBiasesStartAtZero) {
  const ModelParams a = init_params({}, 3);
  EXPECT_EQ(a, init_params({}, 3));
  EXPECT_NE(a.digest(), init_params({}, 4).digest());
  for (double v : a[kC1B].data) EXPECT_EQ(v, 0.0);
}

TEST(Model, RpnEmitsFifteenPerPosition) {
  const ModelParams p = init_params({}, 1);
  const Forward fw(p, ramp_input(64, 96));
  EXPECT_EQ(fw.anchors().size(), 4u * 6u * 15u);
  EXPECT_EQ(fw.objectness().size(), fw.anchors().size());
  EXPECT_EQ(fw.rpn_deltas().size(), fw.anchors().size());
  EXPECT_EQ(fw.features().dim(1), 4);
  EXPECT_EQ(fw.features().dim(2), 6);
}

TEST(Model, ForwardIsDeterministic) {
  const ModelParams p = init_params({}, 1);
  const Forward a(p, ramp_input(48, 48));
  const Forward b(p, ramp_input(48, 48));
  EXPECT_EQ(a.objectness(), b.objectness());
  const std::vector<img::Box> rois{{4, 4, 30, 40}, {10, 2, 44, 20}};
  const auto ha = a.box_head(rois);
  const auto hb = b.box_head(rois);
  EXPECT_EQ(ha.logits, hb.logits);
  const auto ma = a.mask_head(rois);
  ASSERT_EQ(ma.size(), 2u);
  EXPECT_EQ(ma[0].size(), static_cast<std::size_t>(p.config.mask_size() * p.config.mask_size()));
  EXPECT_EQ(ma, b.mask_head(rois));
}

TEST(Model, RejectsInputOffTheStride) {
  const ModelParams p = init_params({}, 1);
  EXPECT_THROW(Forward(p, ramp_input(40, 48)), ValidationError);
  EXPECT_THROW(Forward(p, Tensor({1, 0, 16})), ValidationError);
}

TEST(Model, FeatureCoordinatesTrackStrideTwoStack) {
  // Four stride-2 / pad-1 3x3 convs: feature cell j covers image x = 16 j - 7.5.
  const img::Box f = to_feature_coords({8.5, -7.5, 24.5, 8.5});
  EXPECT_DOUBLE_EQ(f.left, 1.0);
  EXPECT_DOUBLE_EQ(f.top, 0.0);
  EXPECT_DOUBLE_EQ(f.right, 2.0);
  EXPECT_DOUBLE_EQ(f.bottom, 1.0);
}

TEST(Sgd, MomentumAndDecayWorkedExample) {
  std::vector<Tensor> params{Tensor({1}, 1.0)};
  const std::vector<Tensor> grads{Tensor({1}, 0.5)};
  std::vector<Tensor> velocity;
  const SgdConfig cfg{0.1, 0.9, 0.01};
  sgd_step(params, grads, cfg, velocity);
  EXPECT_NEAR(velocity[0][0], 0.51, 1e-15);
  EXPECT_NEAR(params[0][0], 0.949, 1e-15);
  sgd_step(params, grads, cfg, velocity);
  EXPECT_NEAR(velocity[0][0], 0.96849, 1e-14);
  EXPECT_NEAR(params[0][0], 0.852151, 1e-14);
}

TEST(Sgd, NonFiniteGradientLeavesParamsAlone) {
  std::vector<Tensor> params{Tensor({2}, 1.0), Tensor({1}, 2.0)};
  std::vector<Tensor> grads{Tensor({2}, 0.1), Tensor({1}, 0.0)};
  grads[1][0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<Tensor> velocity;
  EXPECT_THROW(sgd_step(params, grads, {}, velocity), DivergenceError);
  EXPECT_EQ(params[0][0], 1.0);
  EXPECT_EQ(params[1][0], 2.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  testing::TempDir dir;
  const ModelParams p = init_params({}, 9);
  save_model(p, dir.path() / "m.bin");
  const ModelParams q = load_model(dir.path() / "m.bin");
  EXPECT_EQ(p, q);
  EXPECT_EQ(p.digest(), q.digest());
  const AnchorConfig same;
  EXPECT_NO_THROW(load_model(dir.path() / "m.bin", &same));
}

TEST(Checkpoint, TruncatedOrFlippedIsCorrupt) {
  testing::TempDir dir;
  const auto path = dir.path() / "m.bin";
  save_model(init_params({}, 9), path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  EXPECT_THROW(load_model(path), CorruptFileError);

  save_model(init_params({}, 9), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size / 2));
    char c = 0;
    f.read(&c, 1);
    f.seekp(static_cast<std::streamoff>(size / 2));
    c = static_cast<char>(c ^ 0x40);
    f.write(&c, 1);
  }
  EXPECT_THROW(load_model(path), CorruptFileError);
  EXPECT_THROW(load_model(dir.path() / "missing.bin"), Error);
}

TEST(Checkpoint, AnchorMismatchIsVersionError) {
  testing::TempDir dir;
  save_model(init_params({}, 9), dir.path() / "m.bin");
  AnchorConfig other;
  other.scales[4] = 128;
  EXPECT_THROW(load_model(dir.path() / "m.bin", &other), VersionError);
}

}  // namespace
}  // namespace slapseg::det
