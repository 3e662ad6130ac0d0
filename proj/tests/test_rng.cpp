#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "fedscope/rng.hpp"

using namespace fedscope::rng;

TEST_CASE("fnv1a matches published reference digests") {
  // Reference values for 64-bit FNV-1a from the canonical test vectors.
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("derive_seed is stable and sensitive to every input") {
  std::uint64_t base = derive_seed(1, "init", {0});
  CHECK(base == derive_seed(1, "init", {0}));
  CHECK(base != derive_seed(2, "init", {0}));
  CHECK(base != derive_seed(1, "shuffle", {0}));
  CHECK(base != derive_seed(1, "init", {1}));
  CHECK(base != derive_seed(1, "init", {0, 0}));
  CHECK(derive_seed(1, "init") == derive_seed(1, "init", {}));
}

TEST_CASE("derived seeds for distinct entities are distinct in practice") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t session = 0; session < 8; ++session)
    for (std::uint64_t client = 0; client < 64; ++client)
      seen.insert(derive_seed(7, "client", {session, client}));
  CHECK(seen.size() == 8u * 64u);
}

TEST_CASE("streams from the same seed produce the same values") {
  Stream a(987654321), b(987654321);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Stream c(987654321), d(987654322);
  bool all_same = true;
  for (int i = 0; i < 10; ++i) all_same = all_same && (c.next_u64() == d.next_u64());
  CHECK(!all_same);
}

TEST_CASE("unit draws live in the half-open unit interval") {
  Stream s(5);
  for (int i = 0; i < 10000; ++i) {
    double u = s.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("unit draws have a roughly uniform mean") {
  Stream s(6);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += s.next_unit();
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("gaussian draws are finite with near-standard moments") {
  Stream s(7);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = s.next_gaussian();
    CHECK(std::isfinite(g));
    sum += g;
    sumsq += g * g;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.0).epsilon(1).scale(0.02));
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("next_below is in range and covers all residues") {
  Stream s(8);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    std::int64_t v = s.next_below(7);
    CHECK(v >= 0);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("shuffle permutes without loss and is seed-deterministic") {
  std::vector<int> base(50);
  for (int i = 0; i < 50; ++i) base[i] = i;

  std::vector<int> a = base, b = base, c = base;
  Stream sa(12), sb(12), sc(13);
  shuffle(a, sa);
  shuffle(b, sb);
  shuffle(c, sc);

  CHECK(a == b);
  CHECK(a != c);
  CHECK(a != base);

  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == base);
}

TEST_CASE("shuffle handles empty and single-element ranges") {
  std::vector<int> empty, one{42};
  Stream s(1);
  shuffle(empty, s);
  shuffle(one, s);
  CHECK(empty.empty());
  CHECK(one == std::vector<int>{42});
}
