#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sage {

/// The 20 canonical amino acids in alphabetical one-letter order, followed by
/// <mask> and <pad>. Ids are contiguous and stable across runs.
class Vocabulary {
 public:
  static constexpr int kNumResidues = 20;
  static constexpr int kMaskId = 20;
  static constexpr int kPadId = 21;
  static constexpr int kSize = 22;

  static const std::string& residues();  // "ACDEFGHIKLMNPQRSTVWY"

  // Residue char -> id in [0, 20). Throws UnknownResidue for anything else,
  // including the ambiguity codes X/B/Z/U/O.
  static int residue_id(char c);
  static char id_residue(int id);
};

std::vector<int> tokenize(const std::string& seq);
std::string detokenize(const std::vector<int>& tokens);

/// One wild-type/mutant pair with a binary pathogenicity label
/// (1 = pathogenic, 0 = benign).
struct VariantRecord {
  std::string id;
  std::string wt;
  std::string mut;
  int label = 0;
};

struct VariantDataset {
  std::vector<VariantRecord> records;
  std::string name;

  std::size_t size() const { return records.size(); }
  bool has_both_classes() const;
  std::size_t count_label(int label) const;
};

// CSV ingestion. Expected header: id,wt_sequence,mut_sequence,label
VariantDataset load_variant_dataset(const std::string& path);
VariantDataset parse_variant_csv(const std::string& text, const std::string& name);
std::string to_csv(const VariantDataset& ds);
void save_variant_dataset(const VariantDataset& ds, const std::string& path);

/// Seeded disjoint split. Test size is round-half-up of fraction * |ds|;
/// record order within each half follows the source dataset.
struct SplitResult {
  VariantDataset train;
  VariantDataset test;
};
SplitResult split_dataset(const VariantDataset& ds, double test_fraction,
                          std::uint64_t seed);

}  // namespace sage
