// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

#include "grafiq/network.hpp"

#include "golden_network.hpp"
#include "grafiq/bns_loss.hpp"
#include "grafiq/random.hpp"
#include "testing.hpp"

namespace {

namespace gn = golden::net;
using grafiq::ErrorCode;
using grafiq::NetworkSpec;
using grafiq::Tensor;
using grafiq::Tensor64;

Tensor64 random_image(const NetworkSpec& spec, std::uint64_t seed) {
  grafiq::Rng rng(seed);
  Tensor64 img({3, spec.input_height, spec.input_width});
  for (double& v : img.data()) v = rng.uniform(-1.0, 1.0);
  return img;
}

TEST(NetworkSpec, JsonRoundTrip) {
  NetworkSpec spec = NetworkSpec::tiny(5, 32, 7);
  spec.activation = grafiq::Activation::Relu;
  spec.head_pool = grafiq::HeadPool::Average;
  EXPECT_EQ(grafiq::spec_from_json(grafiq::spec_to_json(spec)), spec);
  EXPECT_EQ(grafiq::spec_from_json(grafiq::spec_to_json(NetworkSpec::resnet100())), NetworkSpec::resnet100());
}

TEST(NetworkSpec, InvalidSpecsRejected) {
  NetworkSpec spec = NetworkSpec::tiny();
  spec.input_height = 20;  // not divisible by 16
  EXPECT_GRAFIQ_ERROR(spec.validate(), ErrorCode::Spec);
  spec = NetworkSpec::tiny();
  spec.stage_depths[2] = 0;
  EXPECT_GRAFIQ_ERROR(spec.validate(), ErrorCode::Spec);
  spec = NetworkSpec::tiny();
  spec.bn_epsilon = 0.0;
  EXPECT_GRAFIQ_ERROR(spec.validate(), ErrorCode::Spec);
  EXPECT_GRAFIQ_ERROR(grafiq::spec_from_json("{\"stem_width\": 3}"), ErrorCode::Spec);
  EXPECT_GRAFIQ_ERROR(grafiq::spec_from_json("not json"), ErrorCode::Spec);
}

TEST(NetworkSpec, TapNames) {
  for (grafiq::Tap t : grafiq::kAllTaps) EXPECT_EQ(grafiq::tap_from_name(grafiq::tap_name(t)), t);
  EXPECT_EQ(grafiq::tap_from_name("B2"), grafiq::Tap::B2);
  EXPECT_GRAFIQ_ERROR(grafiq::tap_from_name("b5"), ErrorCode::Usage);
}

TEST(ParameterLayout, CountsMatchIndependentLayout) {
  const auto tiny = grafiq::build_network(NetworkSpec::tiny(), grafiq::Init::Zeros);
  EXPECT_EQ(tiny.parameter_count(), static_cast<std::size_t>(gn::tiny_param_count));
  EXPECT_EQ(tiny.bn_layers().size(), static_cast<std::size_t>(gn::tiny_bn_layers));
  std::size_t total = 0;
  for (const auto& p : grafiq::parameter_layout(NetworkSpec::resnet100())) total += grafiq::shape_numel(p.shape);
  EXPECT_EQ(total, static_cast<std::size_t>(gn::resnet100_param_count));
  EXPECT_EQ(grafiq::bn_layer_layout(NetworkSpec::resnet100()).size(), static_cast<std::size_t>(gn::resnet100_bn_layers));
}

TEST(BasicNetwork, RejectsWrongShapes) {
  auto params = grafiq::build_network(NetworkSpec::tiny(), grafiq::Init::Zeros).parameters();
  params.at("stage2.block0.conv1.weight") = Tensor({16, 8, 3, 1});
  EXPECT_GRAFIQ_ERROR(grafiq::Network(NetworkSpec::tiny(), params), ErrorCode::ShapeMismatch);
  params.erase("stage2.block0.conv1.weight");
  EXPECT_GRAFIQ_ERROR(grafiq::Network(NetworkSpec::tiny(), params), ErrorCode::ShapeMismatch);
}

TEST(BasicNetwork, RejectsBrokenRunningStats) {
  auto params = grafiq::build_network(NetworkSpec::tiny(), grafiq::Init::Zeros).parameters();
  params.at("stem.bn.running_std")[0] = -1.0f;
  EXPECT_GRAFIQ_ERROR(grafiq::Network(NetworkSpec::tiny(), params), ErrorCode::NonFiniteStats);
  params.at("stem.bn.running_std")[0] = 1.0f;
  params.at("head.bn.running_mean")[2] = NAN;
  EXPECT_GRAFIQ_ERROR(grafiq::Network(NetworkSpec::tiny(), params), ErrorCode::NonFiniteStats);
}

TEST(BuildNetwork, SeededInitIsReproducible) {
  const auto a = grafiq::build_network(NetworkSpec::tiny(), grafiq::Init::SeededRandom, 42);
  const auto b = grafiq::build_network(NetworkSpec::tiny(), grafiq::Init::SeededRandom, 42);
  const auto c = grafiq::build_network(NetworkSpec::tiny(), grafiq::Init::SeededRandom, 43);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_NE(a.parameters(), c.parameters());
}

TEST(Forward, ShapesAndObservations) {
  const NetworkSpec spec = NetworkSpec::tiny(4, 32, 10);
  const auto net = grafiq::build_network(spec, grafiq::Init::SeededRandom, 3).cast<double>();
  const auto trace = grafiq::forward(net, random_image(spec, 1));
  EXPECT_EQ(trace.stage_outputs[1].shape(), (grafiq::Shape{4, 16, 16}));
  EXPECT_EQ(trace.stage_outputs[2].shape(), (grafiq::Shape{8, 8, 8}));
  EXPECT_EQ(trace.stage_outputs[4].shape(), (grafiq::Shape{32, 2, 2}));
  EXPECT_EQ(trace.embedding.shape(), (grafiq::Shape{10}));
  ASSERT_EQ(trace.bn_observations.size(), net.bn_layers().size());
  for (std::size_t i = 0; i < trace.bn_observations.size(); ++i) {
    EXPECT_EQ(trace.bn_observations[i].layer_index, i);
    EXPECT_EQ(trace.bn_observations[i].layer_id, net.bn_layers()[i].id);
  }
  grafiq::ForwardOptions no_head;
  no_head.observe_head = false;
  EXPECT_EQ(grafiq::forward(net, random_image(spec, 1), no_head).bn_observations.size(),
            net.bn_layers().size() - 2);
}

TEST(Forward, WrongImageShapeIsDimensionError) {
  const auto net = grafiq::build_network(NetworkSpec::tiny(), grafiq::Init::Zeros);
  EXPECT_GRAFIQ_ERROR(grafiq::forward(net, Tensor({3, 16, 15})), ErrorCode::Dimension);
  EXPECT_GRAFIQ_ERROR(grafiq::forward(net, Tensor({1, 16, 16})), ErrorCode::Dimension);
}

TEST(Forward, NonFiniteInputIsOverflow) {
  const auto net = grafiq::build_network(NetworkSpec::tiny(), grafiq::Init::Zeros);
  Tensor img({3, 16, 16});
  img[5] = INFINITY;
  EXPECT_GRAFIQ_ERROR(grafiq::forward(net, img), ErrorCode::NumericOverflow);
}

TEST(Forward, StatisticsNeverFeedBack) {
  const NetworkSpec spec = NetworkSpec::tiny();
  const auto net = grafiq::build_network(spec, grafiq::Init::SeededRandom, 9).cast<double>();
  grafiq::ForwardOptions off;
  off.record_stats = false;
  const Tensor64 img = random_image(spec, 2);
  const auto a = grafiq::forward(net, img);
  const auto b = grafiq::forward(net, img, off);
  EXPECT_EQ(a.embedding, b.embedding);
  EXPECT_TRUE(b.bn_observations.empty());
  EXPECT_FALSE(b.stats_recorded);
}

TEST(Forward, MatchesTorchOracle) {
  struct Case {
    const char* spec;
    const std::vector<golden::GoldenParam>* params;
    const golden::GoldenTensor* image;
    const golden::GoldenTensor* embedding;
    double loss_head;
    double loss_nohead;
  };
  const Case cases[] = {
      {gn::micro_a_spec, &gn::micro_a_params, &gn::micro_a_image, &gn::micro_a_embedding, gn::micro_a_head_loss,
       gn::micro_a_nohead_loss},
      {gn::micro_b_spec, &gn::micro_b_params, &gn::micro_b_image, &gn::micro_b_embedding, gn::micro_b_head_loss,
       gn::micro_b_nohead_loss},
      {gn::micro_c_spec, &gn::micro_c_params, &gn::micro_c_image, &gn::micro_c_embedding, gn::micro_c_head_loss,
       gn::micro_c_nohead_loss},
  };
  for (const Case& c : cases) {
    const auto net = golden::network(c.spec, *c.params);
    const auto trace = grafiq::forward(net, c.image->tensor());
    testing_support::expect_tensor_near(trace.embedding, c.embedding->tensor(), 1e-11);
    EXPECT_LE(testing_support::rel_error(grafiq::mse_bns(trace.bn_observations), c.loss_head), 1e-11);
    grafiq::ForwardOptions no_head;
    no_head.observe_head = false;
    const auto t2 = grafiq::forward(net, c.image->tensor(), no_head);
    EXPECT_LE(testing_support::rel_error(grafiq::mse_bns(t2.bn_observations), c.loss_nohead), 1e-11);
  }
}

TEST(ForwardFrom, UnchangedReplacementReproducesTrace) {
  const NetworkSpec spec = NetworkSpec::tiny();
  const auto net = grafiq::build_network(spec, grafiq::Init::SeededRandom, 5).cast<double>();
  const auto base = grafiq::forward(net, random_image(spec, 4));
  for (grafiq::Tap t : grafiq::kAllTaps) {
    const auto again = grafiq::forward_from(net, base, t, base.stage_outputs[static_cast<std::size_t>(t)]);
    EXPECT_EQ(again.embedding, base.embedding) << grafiq::tap_name(t);
    EXPECT_EQ(grafiq::mse_bns(again.bn_observations), grafiq::mse_bns(base.bn_observations)) << grafiq::tap_name(t);
  }
}

TEST(ForwardFrom, ShapeMismatchRejected) {
  const NetworkSpec spec = NetworkSpec::tiny();
  const auto net = grafiq::build_network(spec, grafiq::Init::SeededRandom, 5).cast<double>();
  const auto base = grafiq::forward(net, random_image(spec, 4));
  EXPECT_GRAFIQ_ERROR(grafiq::forward_from(net, base, grafiq::Tap::B2, Tensor64({3, 3, 3})), ErrorCode::Dimension);
}

TEST(Calibration, SingleImageStatisticsGiveZeroLoss) {
  const NetworkSpec spec = NetworkSpec::tiny(6);
  auto net = grafiq::build_network(spec, grafiq::Init::SeededRandom, 8).cast<double>();
  const Tensor64 img = random_image(spec, 6);
  const std::vector<Tensor64> images{img};
  grafiq::calibrate_running_stats(net, std::span<const Tensor64>(images));
  const auto trace = grafiq::forward(net, img);
  EXPECT_LT(grafiq::mse_bns(trace.bn_observations), 1e-20);
}

TEST(Calibration, ShiftsStoredStatisticsTowardsData) {
  const NetworkSpec spec = NetworkSpec::tiny();
  auto net = grafiq::build_network(spec, grafiq::Init::SeededRandom, 8).cast<double>();
  std::vector<Tensor64> images;
  for (std::uint64_t s = 0; s < 6; ++s) images.push_back(random_image(spec, 100 + s));
  const double before = grafiq::mse_bns(grafiq::forward(net, images[0]).bn_observations);
  grafiq::calibrate_running_stats(net, std::span<const Tensor64>(images));
  EXPECT_LT(grafiq::mse_bns(grafiq::forward(net, images[0]).bn_observations), before);
}

}  // namespace
