#include <gtest/gtest.h>

#include "agex/gan/analysis.hpp"
#include "agex/gan/train_gan.hpp"

using namespace agex;
using namespace agex::gan;

namespace {

GanConfig small_config(double lambda) {
  GanConfig c;
  c.resolution = 32;
  c.generator = GeneratorConfig{32, {16, 8, 8}};
  c.discriminator_channels = {4, 8};
  c.batch_size = 4;
  c.steps = 3;
  c.lambda = lambda;
  c.seed = 5;
  return c;
}

AgeModel small_predictor() {
  AgeModel m(HeadType::regression, BackboneConfig{32, {4, 8}}, 9);
  m.set_output_bias(50.0f);
  return m;
}

nn::Tensor real_batch(int n) {
  nn::Tensor t(n, 1, 32, 32);
  for (int i = 0; i < n; ++i) {
    const auto img = render_phantom(PhantomIdentity::from_seed(i), 20.0 + 10 * i, 32, i);
    std::copy(img.pixels().begin(), img.pixels().end(), t.sample(i));
  }
  return t;
}

}  // namespace

TEST(AgeLoss, Examples) {
  EXPECT_EQ(age_consistency_loss(50, 50, 0.7), 0.0);
  EXPECT_DOUBLE_EQ(age_consistency_loss(50, 40, 1.0), 100.0);
  EXPECT_NEAR(age_consistency_loss(30, 45, 0.01), 2.25, 1e-12);
  EXPECT_DOUBLE_EQ(age_consistency_loss(30, 45, 0.02), 2 * age_consistency_loss(30, 45, 0.01));
  EXPECT_DOUBLE_EQ(age_consistency_loss(30, 50, 0.01), 4 * age_consistency_loss(30, 40, 0.01));
  EXPECT_GT(age_consistency_loss(30, 30.001, 1.0), 0.0);
  EXPECT_THROW(age_consistency_loss(30, 45, -1.0), DomainError);
}

TEST(GeneratorTest, ConditioningLayoutAndDeterminism) {
  const auto w = LatentIdentity::from_seed(3);
  const std::vector<double> ages{52.5};
  const auto z = Generator::conditioning(ages, std::vector<LatentIdentity>{w});
  EXPECT_EQ(z.c, kLatentDim + 1);
  EXPECT_FLOAT_EQ(z.data[0], 0.5f);
  EXPECT_EQ(z.data[1], w.w[0]);
  const Generator g(GeneratorConfig{32, {16, 8, 8}}, 1);
  const auto a = g.generate(40, w);
  const auto b = g.generate(40, w);
  EXPECT_TRUE(std::equal(a.pixels().begin(), a.pixels().end(), b.pixels().begin()));
  for (float v : a.pixels()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  const auto c = g.generate(90, w);
  EXPECT_FALSE(std::equal(a.pixels().begin(), a.pixels().end(), c.pixels().begin()));
  EXPECT_THROW(g.generate(106, w), DomainError);
  EXPECT_THROW(Generator(GeneratorConfig{32, {16, 8}}, 1), ConfigError);
}

TEST(GeneratorTest, CheckpointRoundTrip) {
  const Generator g(GeneratorConfig{32, {16, 8, 8}}, 1);
  const auto back = Generator::from_checkpoint(Checkpoint::from_archive(g.to_checkpoint().to_archive()));
  EXPECT_EQ(back.checksum(), g.checksum());
}

TEST(ReageSweep, MatchesSingleGeneration) {
  const Generator g(GeneratorConfig{32, {16, 8, 8}}, 1);
  const auto w = LatentIdentity::from_seed(3);
  const auto one = reage_sweep(g, w, std::vector<double>{40});
  ASSERT_EQ(one.size(), 1u);
  const auto direct = g.generate(40, w);
  EXPECT_TRUE(std::equal(one[0].pixels().begin(), one[0].pixels().end(), direct.pixels().begin()));
  const std::vector<double> ages{15, 35, 55, 75, 95};
  const auto a = reage_sweep(g, w, ages);
  const auto b = reage_sweep(g, w, ages);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_TRUE(std::equal(a[i].pixels().begin(), a[i].pixels().end(), b[i].pixels().begin()));
  EXPECT_THROW(reage_sweep(g, w, std::vector<double>{50, 40}), DomainError);
}

TEST(DiffMapTest, ZeroAndAntisymmetric) {
  const Generator g(GeneratorConfig{32, {16, 8, 8}}, 1);
  const auto w = LatentIdentity::from_seed(3);
  const auto y = g.generate(20, w);
  const auto o = g.generate(80, w);
  const auto zero = difference_map(y, y);
  for (float v : zero.pixels) EXPECT_EQ(v, 0.0f);
  const auto fwd = difference_map(y, o);
  const auto back = difference_map(o, y);
  for (std::size_t i = 0; i < fwd.pixels.size(); ++i) EXPECT_EQ(fwd.pixels[i], -back.pixels[i]);
  EXPECT_THROW(difference_map(y, GrayImage(64)), ShapeError);
}

TEST(DiffMapTest, MassInsideMask) {
  DiffMap d{2, {1.0f, -3.0f, 0.0f, 4.0f}};
  const std::vector<std::uint8_t> mask{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(mass_inside(d, mask), 0.5);
  EXPECT_DOUBLE_EQ(mask_coverage(mask), 0.5);
}

// With lambda = 0 a generator step with the age term must land on exactly
// the parameters of a step without it.
TEST(AcGan, LambdaZeroStepEqualsUnconditionalStep) {
  const AgeModel m = small_predictor();
  AcGanTrainer with_age(small_config(0.0), m);
  AcGanTrainer without(small_config(0.0), m);
  const auto real = real_batch(4);
  with_age.discriminator_step(real);
  without.discriminator_step(real);
  const std::vector<double> ages{20, 40, 60, 80};
  const auto ws = latent_set(4, 8);
  const auto l = with_age.generator_step(ages, ws, true);
  without.generator_step(ages, ws, false);
  EXPECT_EQ(l.g_age, 0.0);
  EXPECT_EQ(l.age_grad_max, 0.0);
  EXPECT_EQ(with_age.generator().checksum(), without.generator().checksum());

  AcGanTrainer weighted(small_config(1.0), m);
  AcGanTrainer plain(small_config(1.0), m);
  weighted.discriminator_step(real);
  plain.discriminator_step(real);
  EXPECT_GT(weighted.generator_step(ages, ws, true).age_grad_max, 0.0);
  plain.generator_step(ages, ws, false);
  EXPECT_NE(weighted.generator().checksum(), plain.generator().checksum());
}

TEST(AcGan, PredictorStaysFrozen) {
  const AgeModel m = small_predictor();
  const auto before = m.checksum();
  const auto r = train_acgan(small_config(0.5), real_batch(6), m);
  EXPECT_EQ(m.checksum(), before);
  EXPECT_EQ(r.curves.back().step, 3);
}

TEST(AcGan, ResolutionMismatchIsConfigError) {
  const AgeModel m(HeadType::regression, BackboneConfig{64, {4, 8}}, 1);
  EXPECT_THROW(AcGanTrainer(small_config(0.05), m), ConfigError);
}

TEST(AcGan, DivergenceDetectorAborts) {
  GanConfig c = small_config(0.05);
  c.divergence_threshold = 1e9;  // every step counts as collapsed
  c.divergence_window = 2;
  c.steps = 5;
  EXPECT_THROW(train_acgan(c, real_batch(4), small_predictor()), NumericError);
}
