#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>

#include "sage/synthbench.hpp"
#include "test_util.hpp"

using namespace sage;
using testutil::code_of;

namespace {

int diff_position(const VariantRecord& r) {
  int pos = -1;
  for (std::size_t i = 0; i < r.wt.size(); ++i) {
    if (r.wt[i] != r.mut[i]) {
      CHECK(pos == -1);  // at most one substitution
      pos = static_cast<int>(i);
    }
  }
  return pos;
}

}  // namespace

TEST_CASE("alphabets partition cleanly") {
  for (char c : pathogenic_alphabet()) {
    CHECK(background_alphabet().find(c) == std::string::npos);
  }
  for (char c : tail_alphabet()) {
    CHECK(background_alphabet().find(c) != std::string::npos);
  }
}

TEST_CASE("labels are exactly balanced per the fraction") {
  SynthConfig cfg;
  cfg.num_records = 100;
  cfg.seed = 5;
  VariantDataset ds = generate(cfg);
  CHECK(ds.count_label(1) == 50);
  CHECK(ds.count_label(0) == 50);

  cfg.pathogenic_fraction = 0.3;
  CHECK(generate(cfg).count_label(1) == 30);
}

TEST_CASE("same seed reproduces the dataset byte for byte") {
  SynthConfig cfg;
  cfg.seed = 42;
  CHECK(to_csv(generate(cfg)) == to_csv(generate(cfg)));
  cfg.seed = 43;
  CHECK(to_csv(generate(cfg)) != to_csv(generate(SynthConfig{})));
}

TEST_CASE("construction invariants hold on every record") {
  SynthConfig cfg;
  cfg.seed = 9;
  VariantDataset ds = generate(cfg);
  REQUIRE(ds.size() == 200);
  const int tail_start = benign_region_start(cfg);

  for (const auto& r : ds.records) {
    CHECK(r.wt.size() == static_cast<std::size_t>(cfg.seq_len));
    CHECK(r.wt.find(cfg.motif) != std::string::npos);  // motif planted
    // Wild-types never use the reserved alphabet.
    for (char c : r.wt) {
      CHECK(pathogenic_alphabet().find(c) == std::string::npos);
    }
    // The tail is low-complexity by construction.
    for (int p = tail_start; p < cfg.seq_len; ++p) {
      CHECK(tail_alphabet().find(r.wt[static_cast<std::size_t>(p)]) !=
            std::string::npos);
    }

    const int pos = diff_position(r);
    REQUIRE(pos >= 0);  // never a silent no-op
    const char sub = r.mut[static_cast<std::size_t>(pos)];
    const auto start = static_cast<int>(r.wt.find(cfg.motif));
    if (r.label == 1) {
      CHECK(pathogenic_alphabet().find(sub) != std::string::npos);
      CHECK(pos >= start);  // inside the motif
      CHECK(pos < start + static_cast<int>(cfg.motif.size()));
    } else {
      CHECK(tail_alphabet().find(sub) != std::string::npos);
      CHECK(pos >= tail_start);  // distal to the motif
    }
  }
}

TEST_CASE("motif placement varies across records") {
  SynthConfig cfg;
  cfg.seed = 4;
  VariantDataset ds = generate(cfg);
  std::set<std::size_t> starts;
  for (const auto& r : ds.records) starts.insert(r.wt.find(cfg.motif));
  CHECK(starts.size() > 1);
  // Never into the tail.
  for (auto s : starts) {
    CHECK(s + cfg.motif.size() <=
          static_cast<std::size_t>(benign_region_start(cfg)));
  }
}

TEST_CASE("invalid configurations are rejected") {
  SynthConfig cfg;
  cfg.num_records = 0;
  CHECK(code_of([&] { generate(cfg); }) == ErrorCode::InvalidConfig);

  cfg = SynthConfig{};
  cfg.motif = "";
  CHECK(code_of([&] { generate(cfg); }) == ErrorCode::InvalidConfig);

  cfg = SynthConfig{};
  cfg.motif = "WYN";  // N is reserved for pathogenic substitutions
  CHECK(code_of([&] { generate(cfg); }) == ErrorCode::InvalidConfig);

  cfg = SynthConfig{};
  cfg.motif = "WXY";
  CHECK(code_of([&] { generate(cfg); }) == ErrorCode::UnknownResidue);

  cfg = SynthConfig{};
  cfg.pathogenic_fraction = 1.0;
  CHECK(code_of([&] { generate(cfg); }) == ErrorCode::InvalidConfig);

  cfg = SynthConfig{};
  cfg.seq_len = 5;  // shorter than the motif
  CHECK(code_of([&] { generate(cfg); }) == ErrorCode::InvalidConfig);

  // Room for the motif but no tail left for benign mutants.
  cfg = SynthConfig{};
  cfg.seq_len = 7;
  CHECK(code_of([&] { generate(cfg); }) == ErrorCode::InvalidConfig);
}
