#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "psv/common.hpp"
#include "psv/parallel.hpp"

using namespace psv;

TEST_CASE("sha256 matches the published test vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("derived seeds are stable and label-sensitive") {
  CHECK(derive_seed(1, "solve") == derive_seed(1, "solve"));
  CHECK(derive_seed(1, "solve") != derive_seed(1, "eval"));
  CHECK(derive_seed(1, std::uint64_t{3}) != derive_seed(2, std::uint64_t{3}));
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const double u = unit_interval(mix64(k));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("bounded stays in range") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) CHECK(bounded(rng, 7) < 7u);
}

TEST_CASE("atomic write and jsonl round trip") {
  testing::TempDir dir;
  const auto p = dir / "a/b/c.jsonl";
  write_jsonl(p, {{{"schema_version", 1}, {"x", 1}}, {{"schema_version", 1}, {"x", 2}}});
  const auto back = read_jsonl(p);
  REQUIRE(back.size() == 2);
  CHECK(back[1]["x"] == 2);
  CHECK_NOTHROW(check_schema(back[0], p));
  CHECK_THROWS_AS(check_schema(json{{"schema_version", 99}}, p), SchemaError);

  write_file_atomic(dir / "bad.jsonl", "{\"a\":1}\n{oops\n");
  CHECK_THROWS_AS(read_jsonl(dir / "bad.jsonl"), SchemaError);
}

TEST_CASE("split and trim") {
  CHECK(split("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(trim("  x y \n") == "x y");
}

TEST_CASE("parallel_for agrees with serial_for and propagates exceptions") {
  std::vector<int> a(200), b(200);
  parallel_for(a.size(), 4, [&](std::size_t i) { a[i] = static_cast<int>(i * i); });
  serial_for(b.size(), [&](std::size_t i) { b[i] = static_cast<int>(i * i); });
  CHECK(a == b);
  CHECK_THROWS_AS(parallel_for(10, 2, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("seven");
                  }),
                  std::runtime_error);
}
