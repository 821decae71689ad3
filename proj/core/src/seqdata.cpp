#include "sage/seqdata.hpp"

#include <array>
#include <cmath>
#include <unordered_set>

#include "sage/errors.hpp"
#include "sage/rng.hpp"
#include "sage/util.hpp"

namespace sage {

namespace {

constexpr char kResidues[] = "ACDEFGHIKLMNPQRSTVWY";

std::array<int, 256> build_lookup() {
  std::array<int, 256> table;
  table.fill(-1);
  for (int i = 0; i < Vocabulary::kNumResidues; ++i) {
    table[static_cast<unsigned char>(kResidues[i])] = i;
  }
  return table;
}

const std::array<int, 256>& lookup() {
  static const std::array<int, 256> table = build_lookup();
  return table;
}

}  // namespace

const std::string& Vocabulary::residues() {
  static const std::string r(kResidues);
  return r;
}

int Vocabulary::residue_id(char c) {
  int id = lookup()[static_cast<unsigned char>(c)];
  if (id < 0) {
    raise(ErrorCode::UnknownResidue,
          std::string("non-canonical residue '") + c + "'");
  }
  return id;
}

char Vocabulary::id_residue(int id) {
  if (id < 0 || id >= kNumResidues) {
    raise(ErrorCode::UnknownResidue,
          "id " + std::to_string(id) + " is not a residue id");
  }
  return kResidues[id];
}

std::vector<int> tokenize(const std::string& seq) {
  std::vector<int> ids;
  ids.reserve(seq.size());
  for (char c : seq) ids.push_back(Vocabulary::residue_id(c));
  return ids;
}

std::string detokenize(const std::vector<int>& tokens) {
  std::string seq;
  seq.reserve(tokens.size());
  for (int id : tokens) seq.push_back(Vocabulary::id_residue(id));
  return seq;
}

bool VariantDataset::has_both_classes() const {
  bool has0 = false, has1 = false;
  for (const auto& r : records) (r.label ? has1 : has0) = true;
  return has0 && has1;
}

std::size_t VariantDataset::count_label(int label) const {
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.label == label) ++n;
  }
  return n;
}

namespace {

constexpr const char* kHeader = "id,wt_sequence,mut_sequence,label";

void validate_sequence(const std::string& seq, const std::string& id,
                       std::size_t line_no) {
  if (seq.empty()) {
    raise(ErrorCode::ParseError, "empty sequence in record '" + id +
                                     "' (line " + std::to_string(line_no) + ")");
  }
  for (char c : seq) Vocabulary::residue_id(c);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

}  // namespace

VariantDataset parse_variant_csv(const std::string& text,
                                 const std::string& name) {
  VariantDataset ds;
  ds.name = name;

  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::unordered_set<std::string> seen_ids;
  bool saw_header = false;

  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string line = (eol == std::string::npos) ? text.substr(pos)
                                                  : text.substr(pos, eol - pos);
    pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;

    if (!saw_header) {
      if (line != kHeader) {
        raise(ErrorCode::ParseError,
              "expected header '" + std::string(kHeader) + "', got '" + line + "'");
      }
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;  // trailing newline / blank lines

    auto fields = split_fields(line);
    if (fields.size() != 4) {
      raise(ErrorCode::ParseError, "line " + std::to_string(line_no) +
                                       ": expected 4 fields, got " +
                                       std::to_string(fields.size()));
    }
    VariantRecord rec;
    rec.id = fields[0];
    rec.wt = fields[1];
    rec.mut = fields[2];
    if (rec.id.empty()) {
      raise(ErrorCode::ParseError,
            "line " + std::to_string(line_no) + ": empty id");
    }
    if (fields[3] == "0") {
      rec.label = 0;
    } else if (fields[3] == "1") {
      rec.label = 1;
    } else {
      raise(ErrorCode::ParseError, "line " + std::to_string(line_no) +
                                       ": label '" + fields[3] +
                                       "' is not 0 or 1");
    }
    validate_sequence(rec.wt, rec.id, line_no);
    validate_sequence(rec.mut, rec.id, line_no);
    if (!seen_ids.insert(rec.id).second) {
      raise(ErrorCode::DuplicateId, "duplicate record id '" + rec.id + "'");
    }
    ds.records.push_back(std::move(rec));
  }
  if (!saw_header) {
    raise(ErrorCode::ParseError, "empty file: missing header");
  }
  return ds;
}

VariantDataset load_variant_dataset(const std::string& path) {
  std::string name = path;
  std::size_t slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  std::size_t dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return parse_variant_csv(read_file(path), name);
}

std::string to_csv(const VariantDataset& ds) {
  std::string out(kHeader);
  out.push_back('\n');
  for (const auto& r : ds.records) {
    out += r.id;
    out.push_back(',');
    out += r.wt;
    out.push_back(',');
    out += r.mut;
    out.push_back(',');
    out += r.label ? '1' : '0';
    out.push_back('\n');
  }
  return out;
}

void save_variant_dataset(const VariantDataset& ds, const std::string& path) {
  write_file(path, to_csv(ds));
}

SplitResult split_dataset(const VariantDataset& ds, double test_fraction,
                          std::uint64_t seed) {
  if (ds.records.empty()) {
    raise(ErrorCode::EmptyDataset, "cannot split an empty dataset");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    raise(ErrorCode::ParseError, "test_fraction must lie in (0,1), got " +
                                     format_full(test_fraction));
  }
  const std::size_t n = ds.records.size();
  // round-half-up
  const auto test_size = static_cast<std::size_t>(
      std::floor(test_fraction * static_cast<double>(n) + 0.5));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<bool> in_test(n, false);
  for (std::size_t i = 0; i < test_size; ++i) in_test[order[i]] = true;

  SplitResult result;
  result.train.name = ds.name + "_train";
  result.test.name = ds.name + "_test";
  for (std::size_t i = 0; i < n; ++i) {
    (in_test[i] ? result.test : result.train).records.push_back(ds.records[i]);
  }
  return result;
}

}  // namespace sage
