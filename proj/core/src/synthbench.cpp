#include "sage/synthbench.hpp"

#include <cmath>

#include "sage/errors.hpp"
#include "sage/rng.hpp"

namespace sage {

const std::string& background_alphabet() {
  static const std::string bg = "ACDEFGHIKLMTVWY";
  return bg;
}

const std::string& tail_alphabet() {
  static const std::string tail = "AG";
  return tail;
}

const std::string& pathogenic_alphabet() {
  static const std::string reserved = "NPQRS";
  return reserved;
}

void SynthConfig::validate() const {
  if (num_records <= 0) {
    raise(ErrorCode::InvalidConfig, "num_records must be positive");
  }
  if (motif.empty()) {
    raise(ErrorCode::InvalidConfig, "motif must be non-empty");
  }
  for (char c : motif) {
    Vocabulary::residue_id(c);  // UnknownResidue on anything else
    if (background_alphabet().find(c) == std::string::npos) {
      raise(ErrorCode::InvalidConfig,
            std::string("motif residue '") + c +
                "' is reserved for pathogenic substitutions");
    }
  }
  if (seq_len < static_cast<int>(motif.size())) {
    raise(ErrorCode::InvalidConfig,
          "seq_len " + std::to_string(seq_len) + " shorter than motif (" +
              std::to_string(motif.size()) + ")");
  }
  if (!(pathogenic_fraction > 0.0 && pathogenic_fraction < 1.0)) {
    raise(ErrorCode::InvalidConfig,
          "pathogenic_fraction must lie strictly between 0 and 1");
  }
}

int benign_region_start(const SynthConfig& cfg) {
  // The tail is the distal half of the non-motif positions.
  return cfg.seq_len - (cfg.seq_len - static_cast<int>(cfg.motif.size())) / 2;
}

VariantDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const int motif_len = static_cast<int>(cfg.motif.size());
  const int tail_start = benign_region_start(cfg);
  const int tail = cfg.seq_len - tail_start;
  const int placements = tail_start - motif_len + 1;

  const int num_path = static_cast<int>(
      std::floor(cfg.pathogenic_fraction * cfg.num_records + 0.5));
  const int num_benign = cfg.num_records - num_path;
  if (num_benign > 0 && tail <= 0) {
    raise(ErrorCode::InvalidConfig,
          "benign mutants need at least one position distal to the motif");
  }

  const std::string& bg = background_alphabet();
  const std::string& reserved = pathogenic_alphabet();
  Rng rng(cfg.seed);
  VariantDataset ds;
  ds.name = "synth";
  ds.records.reserve(static_cast<std::size_t>(cfg.num_records));

  const std::string& tails = tail_alphabet();
  for (int i = 0; i < cfg.num_records; ++i) {
    std::string wt(static_cast<std::size_t>(cfg.seq_len), ' ');
    for (int pos = 0; pos < tail_start; ++pos) {
      wt[static_cast<std::size_t>(pos)] = bg[rng.uniform_int(bg.size())];
    }
    for (int pos = tail_start; pos < cfg.seq_len; ++pos) {
      wt[static_cast<std::size_t>(pos)] = tails[rng.uniform_int(tails.size())];
    }
    const int start = static_cast<int>(rng.uniform_int(placements));
    for (int k = 0; k < motif_len; ++k) {
      wt[static_cast<std::size_t>(start + k)] =
          cfg.motif[static_cast<std::size_t>(k)];
    }

    const int label = i < num_path ? 1 : 0;
    std::string mut = wt;
    if (label == 1) {
      // A reserved residue inside the motif; never a no-op by construction.
      const int pos = start + static_cast<int>(rng.uniform_int(motif_len));
      mut[static_cast<std::size_t>(pos)] =
          reserved[rng.uniform_int(reserved.size())];
    } else {
      const int pos = tail_start + static_cast<int>(rng.uniform_int(tail));
      const char old = wt[static_cast<std::size_t>(pos)];
      char next;
      do {
        next = tails[rng.uniform_int(tails.size())];
      } while (next == old);
      mut[static_cast<std::size_t>(pos)] = next;
    }

    ds.records.push_back(
        {"synth-" + std::to_string(i), std::move(wt), std::move(mut), label});
  }
  return ds;
}

}  // namespace sage
