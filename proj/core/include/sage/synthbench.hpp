#pragma once

#include <cstdint>
#include <string>

#include "sage/seqdata.hpp"

namespace sage {

/// Synthetic benchmark: every wild-type is a proximal region of uniform
/// random background residues carrying the motif at a per-record position,
/// followed by a low-complexity distal tail drawn from a small tail
/// alphabet. Pathogenic mutants replace one motif residue with a residue
/// from a reserved alphabet that never occurs in any wild-type, so the
/// pathogenic signal is carried by residue content alone rather than by any
/// fixed sequence position. Benign mutants swap one tail residue for
/// another tail residue; tolerated variation sits in the low-complexity
/// region far from the functional site, as it tends to in real proteins.
/// The construction guarantees (not merely hopes for) a learnable
/// likelihood gap between the classes.
struct SynthConfig {
  int num_records = 200;
  int seq_len = 24;
  double pathogenic_fraction = 0.5;
  std::string motif = "WYCHKD";
  std::uint64_t seed = 0;

  void validate() const;
};

/// Residues the proximal region and the motif are built from.
const std::string& background_alphabet();

/// Low-complexity alphabet of the distal tail; benign mutants swap within
/// it. Subset of the background alphabet.
const std::string& tail_alphabet();

/// Residues reserved for pathogenic substitutions; disjoint from the
/// background alphabet, and the motif may not use them.
const std::string& pathogenic_alphabet();

/// First position of the distal tail region benign mutants may touch; the
/// motif floats anywhere in [0, benign_region_start - motif length].
int benign_region_start(const SynthConfig& cfg);

VariantDataset generate(const SynthConfig& cfg);

}  // namespace sage
