#include <doctest.h>

#include <cmath>

#include "qsrlab/schedules.hpp"

using qsrlab::schedules::LrSchedule;

TEST_CASE("cosine schedule endpoints and midpoint") {
  const auto s = LrSchedule::cosine(0.008, 1e-6, 10000, 93600);
  CHECK(s.lr_at(10000) == doctest::Approx(0.008).epsilon(1e-12));
  // decays to nearly the end value within one cosine step
  CHECK(s.lr_at(93599) == doctest::Approx(1e-6).epsilon(1e-2));
  // half phase: eta_end + (eta_max - eta_end)/2, hand evaluation
  CHECK(s.lr_at(10000 + 41800) == doctest::Approx(0.0040005).epsilon(1e-9));
}

TEST_CASE("linear schedule endpoints and midpoint") {
  const auto s = LrSchedule::linear(0.016, 0.0, 10000, 93600);
  CHECK(s.lr_at(10000) == doctest::Approx(0.016).epsilon(1e-12));
  CHECK(s.lr_at((10000 + 93600) / 2) == doctest::Approx(0.008).epsilon(1e-12));
  const auto s2 = LrSchedule::linear(0.4, 0.2, 0, 1000);
  CHECK(s2.lr_at(500) == doctest::Approx((0.4 + 0.2) / 2).epsilon(1e-12));
}

TEST_CASE("warmup ramp is linear, strictly increasing, capped by the peak") {
  const auto s = LrSchedule::cosine(0.8, 0.0, 100, 1000);
  CHECK(s.lr_at(0) == doctest::Approx(0.8 / 100));
  for (int t = 1; t < 100; ++t) CHECK(s.lr_at(t) > s.lr_at(t - 1));
  CHECK(s.lr_at(99) <= 0.8 + 1e-15);
  CHECK(s.lr_at(100) <= 0.8 + 1e-15);
}

TEST_CASE("step quantization rounds to powers of two") {
  // Probe specific rates through a schedule that starts at them exactly.
  auto probe = [](double eta) {
    const auto base = LrSchedule::linear(eta, eta / 1000.0, 0, 10);
    return LrSchedule::step_quantized(base).lr_at(0);
  };
  CHECK(probe(0.03125) == doctest::Approx(0.03125).epsilon(1e-15));  // fixed point
  CHECK(probe(0.0031) == doctest::Approx(0.00390625).epsilon(1e-15));
  CHECK(probe(0.004) == doctest::Approx(0.00390625).epsilon(1e-15));
  // ties on the exponent round half-to-even
  CHECK(probe(std::exp2(-7.5)) == doctest::Approx(std::exp2(-8.0)).epsilon(1e-15));
  CHECK(probe(std::exp2(-8.5)) == doctest::Approx(std::exp2(-8.0)).epsilon(1e-15));
}

TEST_CASE("step quantization copies warmup and stays within half an octave") {
  const auto base = LrSchedule::cosine(0.008, 1e-6, 50, 2000);
  const auto q = LrSchedule::step_quantized(base);
  for (int t = 0; t < 50; ++t) CHECK(q.lr_at(t) == base.lr_at(t));
  for (int t = 50; t < 2000; t += 7) {
    const double diff = std::abs(std::log2(q.lr_at(t)) - std::log2(base.lr_at(t)));
    CHECK(diff <= 0.5 + 1e-12);
    // every emitted value is an exact power of two
    const double e = std::log2(q.lr_at(t));
    CHECK(e == doctest::Approx(std::nearbyint(e)).epsilon(1e-15));
  }
}

TEST_CASE("modified cosine freezes the rate at the freeze step") {
  const auto base = LrSchedule::cosine(0.008, 1e-6, 100, 3000, 10);
  SUBCASE("freeze at the last step is a no-op") {
    const auto m = LrSchedule::modified_cosine(base, 2999);
    for (int t = 0; t < 3000; t += 13) CHECK(m.lr_at(t) == base.lr_at(t));
  }
  SUBCASE("freeze mid-run holds the frozen value") {
    const std::int64_t freeze = 260 * 10;
    const auto m = LrSchedule::modified_cosine(base, freeze);
    for (std::int64_t t = freeze; t < 3000; t += 17)
      CHECK(m.lr_at(t) == base.lr_at(freeze));
    CHECK(m.lr_at(freeze - 1) == base.lr_at(freeze - 1));
  }
  SUBCASE("freeze at warmup end pins the peak") {
    const auto m = LrSchedule::modified_cosine(base, 100);
    for (int t = 100; t < 3000; t += 100)
      CHECK(m.lr_at(t) == doctest::Approx(0.008).epsilon(1e-12));
  }
}

TEST_CASE("smith step staircase") {
  // 300 epochs of 10 steps; plateau 150 epochs, halve every 30.
  const auto s = LrSchedule::smith_step(0.1, 0, 3000, 10);
  auto lr_epoch = [&](std::int64_t e) { return s.lr_at(e * 10 + 5); };
  CHECK(lr_epoch(100) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(lr_epoch(149) == doctest::Approx(0.1).epsilon(1e-15));
  // first halving takes effect at epoch 150
  CHECK(lr_epoch(150) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(lr_epoch(179) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(lr_epoch(180) == doctest::Approx(0.025).epsilon(1e-15));
  // five halvings by the final epoch
  CHECK(lr_epoch(299) == doctest::Approx(0.1 / 32.0).epsilon(1e-15));
}

TEST_CASE("post-warmup monotonicity holds for every kind") {
  const auto spe = 10;
  const LrSchedule all[] = {
      LrSchedule::cosine(0.8, 0.0, 100, 2000, spe),
      LrSchedule::linear(0.8, 0.01, 100, 2000, spe),
      LrSchedule::step_quantized(LrSchedule::cosine(0.8, 1e-5, 100, 2000, spe)),
      LrSchedule::modified_cosine(LrSchedule::cosine(0.8, 0.0, 100, 2000, spe), 700),
      LrSchedule::smith_step(0.8, 100, 2000, spe, 50, 20),
  };
  for (const auto& s : all) {
    for (std::int64_t t = s.warmup_steps(); t + 1 < s.total_steps(); ++t)
      CHECK(s.lr_at(t + 1) <= s.lr_at(t) + 1e-15);
  }
}

TEST_CASE("identical inputs give bit-identical rates") {
  const auto a = LrSchedule::cosine(0.008, 1e-6, 10000, 93600);
  const auto b = LrSchedule::cosine(0.008, 1e-6, 10000, 93600);
  for (std::int64_t t : {0L, 9999L, 10000L, 51800L, 93599L})
    CHECK(a.lr_at(t) == b.lr_at(t));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(LrSchedule::cosine(0.1, 0.2, 0, 100), std::invalid_argument);
  CHECK_THROWS_AS(LrSchedule::cosine(0.1, 0.0, 100, 100), std::invalid_argument);
  CHECK_THROWS_AS(LrSchedule::cosine(0.1, 0.0, -1, 100), std::invalid_argument);
  CHECK_THROWS_AS(
      LrSchedule::modified_cosine(LrSchedule::cosine(0.1, 0.0, 10, 100), 5),
      std::invalid_argument);
  CHECK_THROWS_AS(LrSchedule::smith_step(0.1, 0, 100, 10, 20, 5),
                  std::invalid_argument);
  const auto s = LrSchedule::cosine(0.1, 0.0, 10, 100);
  CHECK_THROWS_AS(s.lr_at(-1), std::out_of_range);
  CHECK_THROWS_AS(s.lr_at(100), std::out_of_range);
}
