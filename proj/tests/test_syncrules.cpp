#include <doctest.h>

#include <cstdint>

#include "qsrlab/schedules.hpp"
#include "qsrlab/syncrules.hpp"

using qsrlab::schedules::LrSchedule;
using namespace qsrlab::syncrules;

namespace {

// ImageNet-scale step counts: 1,281,167 images, drop-last batching.
constexpr std::int64_t kStepsPerEpoch = 1281167 / 4096;  // 312

LrSchedule vit_cosine() {
  return LrSchedule::cosine(0.008, 1e-6, 10000, 300 * kStepsPerEpoch,
                            kStepsPerEpoch);
}

LrSchedule resnet_cosine() {
  return LrSchedule::cosine(0.8, 0.0, 5 * kStepsPerEpoch,
                            200 * kStepsPerEpoch, kStepsPerEpoch);
}

}  // namespace

TEST_CASE("quadratic rule period from the current learning rate") {
  // eta = 0.008: (0.0175/0.008)^2 = 4.785 -> max(4, 4) = 4
  const auto s8 = LrSchedule::cosine(0.008, 0.0, 0, 100000);
  CHECK(next_period(SyncRule::qsr(0.0175, 4), 0, s8) == 4);
  // eta = 0.0008: (21.875)^2 = 478.5 -> 478
  const auto s08 = LrSchedule::cosine(0.0008, 0.0, 0, 100000);
  CHECK(next_period(SyncRule::qsr(0.0175, 4), 0, s08) == 478);
}

TEST_CASE("the final round is truncated to the last step") {
  const auto s = LrSchedule::cosine(0.1, 0.0, 0, 1000);
  CHECK(next_period(SyncRule::constant(10), 997, s) == 3);
  CHECK(next_period(SyncRule::qsr(10.0, 4), 997, s) == 3);
  CHECK_THROWS_AS(next_period(SyncRule::constant(4), 1000, s),
                  std::out_of_range);
}

TEST_CASE("warmup rounds use the first post-warmup rate") {
  const auto s = LrSchedule::cosine(0.008, 1e-6, 200, 5000);
  const auto rule = SyncRule::qsr(0.0175, 4);
  CHECK(next_period(rule, 0, s) == next_period(rule, 200, s));
  CHECK(next_period(rule, 150, s) == next_period(rule, 200, s));
}

TEST_CASE("post-local switches from every-step syncing to a fixed period") {
  const auto s = LrSchedule::cosine(0.1, 0.0, 0, 1000);
  const auto rule = SyncRule::post_local(500, 16);
  CHECK(next_period(rule, 0, s) == 1);
  CHECK(next_period(rule, 499, s) == 1);
  CHECK(next_period(rule, 500, s) == 16);
  CHECK(next_period(rule, 996, s) == 4);  // truncated tail
}

TEST_CASE("swap runs a constant period then one pure-local final phase") {
  const auto s = LrSchedule::cosine(0.1, 0.0, 0, 1000);
  const auto rule = SyncRule::swap(8, 600);
  CHECK(next_period(rule, 0, s) == 8);
  CHECK(next_period(rule, 592, s) == 8);
  CHECK(next_period(rule, 600, s) == 400);  // single final averaging
  const auto tl = expand_timeline(rule, s);
  CHECK(tl.rounds.back().start_step == 600);
  CHECK(tl.rounds.back().period == 400);
  CHECK(tl.num_syncs == 600 / 8 + 1);
}

TEST_CASE("timeline expansion partitions the step range") {
  const auto s = LrSchedule::cosine(0.1, 0.0, 0, 100);
  SUBCASE("H=1 gives one round per step") {
    const auto tl = expand_timeline(SyncRule::constant(1), s);
    CHECK(tl.num_syncs == 100);
  }
  SUBCASE("H=4 gives 25 rounds of 4") {
    const auto tl = expand_timeline(SyncRule::constant(4), s);
    CHECK(tl.num_syncs == 25);
    for (const auto& r : tl.rounds) CHECK(r.period == 4);
  }
}

TEST_CASE("round lengths always sum to the horizon") {
  const auto s = vit_cosine();
  for (const auto& rule :
       {SyncRule::constant(7), SyncRule::qsr(0.0175, 4),
        SyncRule::cubic(0.0075, 4), SyncRule::beta_over_eta(0.03, 4),
        SyncRule::post_local(40000, 64), SyncRule::swap(4, 80000)}) {
    const auto tl = expand_timeline(rule, s);
    std::int64_t sum = 0;
    for (const auto& r : tl.rounds) {
      CHECK(r.period >= 1);
      sum += r.period;
    }
    CHECK(sum == s.total_steps());
  }
}

TEST_CASE("power-rule periods grow as the rate decays and respect the clamp") {
  const auto s = vit_cosine();
  const auto tl = expand_timeline(SyncRule::qsr(0.0175, 4), s);
  CHECK(tl.rounds.front().period == 4);  // early plateau at h_base
  for (std::size_t i = 0; i + 2 < tl.rounds.size(); ++i)
    CHECK(tl.rounds[i + 1].period >= tl.rounds[i].period);
  for (std::size_t i = 0; i + 1 < tl.rounds.size(); ++i)
    CHECK(tl.rounds[i].period >= 4);
}

TEST_CASE("quadratic versus cubic period growth across the decay") {
  // With the tuned coefficient pair, the cubic rule syncs more often early
  // (smaller raw periods at high eta) and far less often late.
  const auto s = vit_cosine();
  const auto qsr = SyncRule::qsr(0.0175, 1);
  const auto cubic = SyncRule::cubic(0.0075, 1);
  const std::int64_t early = 20000;
  CHECK(next_period(cubic, early, s) < next_period(qsr, early, s));
  const std::int64_t late = 80000;  // away from the truncation tail
  CHECK(next_period(cubic, late, s) > next_period(qsr, late, s));
}

TEST_CASE("communication fraction of constant rules") {
  const auto s = vit_cosine();
  CHECK(comm_fraction(SyncRule::constant(4), s) == doctest::Approx(0.25));
  CHECK(comm_fraction(SyncRule::constant(8), s) == doctest::Approx(0.125));
  // ceil(T/H)/T within one final-round rounding
  const auto s2 = LrSchedule::cosine(0.1, 0.0, 0, 1001);
  CHECK(comm_fraction(SyncRule::constant(4), s2) ==
        doctest::Approx(251.0 / 1001.0));
}

TEST_CASE("quadratic-rule fractions reproduce the reported volumes") {
  // ViT-B 300-epoch cosine, B = 4096: 10.4% and 6.9%.
  const auto vit = vit_cosine();
  CHECK(comm_fraction(SyncRule::qsr(0.0175, 4), vit) ==
        doctest::Approx(0.104).epsilon(0.15));
  CHECK(comm_fraction(SyncRule::qsr(0.0175, 8), vit) ==
        doctest::Approx(0.069).epsilon(0.15));
  // ResNet-152 200-epoch cosine: 39.7% and 20.1%.
  const auto resnet = resnet_cosine();
  CHECK(comm_fraction(SyncRule::qsr(0.2, 2), resnet) ==
        doctest::Approx(0.397).epsilon(0.05));
  CHECK(comm_fraction(SyncRule::qsr(0.25, 4), resnet) ==
        doctest::Approx(0.201).epsilon(0.05));
}

TEST_CASE("reported volumes also reproduce at batch 16384 and on step decay") {
  // Batch 16384: 78 steps/epoch; tuned peaks 1.6 (ResNet) and 0.016 (ViT),
  // ViT warmup 2500 steps.
  const std::int64_t spe16k = 1281167 / 16384;
  const auto resnet16k = LrSchedule::cosine(1.6, 0.0, 5 * spe16k,
                                            200 * spe16k, spe16k);
  CHECK(comm_fraction(SyncRule::qsr(0.2, 2), resnet16k) ==
        doctest::Approx(0.428).epsilon(0.01));
  CHECK(comm_fraction(SyncRule::qsr(0.2, 4), resnet16k) ==
        doctest::Approx(0.219).epsilon(0.01));
  const auto vit16k =
      LrSchedule::cosine(0.016, 1e-6, 2500, 300 * spe16k, spe16k);
  CHECK(comm_fraction(SyncRule::qsr(0.0175, 4), vit16k) ==
        doctest::Approx(0.161).epsilon(0.01));
  CHECK(comm_fraction(SyncRule::qsr(0.01, 8), vit16k) ==
        doctest::Approx(0.098).epsilon(0.01));

  // Step decay (powers of two), batch 4096; ViT uses alpha = 0.015.
  const auto resnet_step = LrSchedule::step_quantized(resnet_cosine());
  CHECK(comm_fraction(SyncRule::qsr(0.2, 2), resnet_step) ==
        doctest::Approx(0.403).epsilon(0.01));
  CHECK(comm_fraction(SyncRule::qsr(0.2, 4), resnet_step) ==
        doctest::Approx(0.205).epsilon(0.01));
  const auto vit_step = LrSchedule::step_quantized(vit_cosine());
  CHECK(comm_fraction(SyncRule::qsr(0.015, 4), vit_step) ==
        doctest::Approx(0.127).epsilon(0.01));
  CHECK(comm_fraction(SyncRule::qsr(0.015, 8), vit_step) ==
        doctest::Approx(0.072).epsilon(0.01));
}

TEST_CASE("rule construction rejects bad parameters") {
  CHECK_THROWS_AS(SyncRule::constant(0), std::invalid_argument);
  CHECK_THROWS_AS(SyncRule::qsr(-1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(SyncRule::power(4, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(SyncRule::swap(0, 10), std::invalid_argument);
}
