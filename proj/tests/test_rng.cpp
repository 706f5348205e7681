#include <doctest.h>

#include <cmath>

#include "dm/rng.hpp"

using dm::RngStream;

TEST_CASE("same seed reproduces the stream") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("named substreams are independent of each other") {
  RngStream a = RngStream::substream(7, "policy");
  RngStream b = RngStream::substream(7, "critic");
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= a.next_u64() != b.next_u64();
  CHECK(any_diff);

  RngStream a3 = RngStream::substream(7, "policy");
  RngStream a4 = RngStream::substream(7, "policy");
  for (int i = 0; i < 16; ++i) CHECK(a3.next_u64() == a4.next_u64());
}

TEST_CASE("uniform_int stays in range and covers endpoints") {
  RngStream rng(1);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 2000; ++i) {
    int64_t v = rng.uniform_int(3, 7);
    CHECK(v >= 3);
    CHECK(v <= 7);
    saw_lo |= v == 3;
    saw_hi |= v == 7;
  }
  CHECK(saw_lo);
  CHECK(saw_hi);
}

TEST_CASE("normal draws have the right moments") {
  RngStream rng(5);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("sample_without_replacement yields distinct indices") {
  RngStream rng(9);
  auto picks = rng.sample_without_replacement(10, 10);
  std::vector<bool> seen(10, false);
  for (int p : picks) {
    CHECK(!seen[static_cast<size_t>(p)]);
    seen[static_cast<size_t>(p)] = true;
  }
  CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), dm::InsufficientData);
}

TEST_CASE("state serialization round-trips") {
  RngStream a(123);
  for (int i = 0; i < 7; ++i) (void)a.normal();
  std::string state = a.serialize();
  RngStream b;
  b.deserialize(state);
  for (int i = 0; i < 32; ++i) CHECK(a.next_u64() == b.next_u64());
}
