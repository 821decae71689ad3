#include "sage/util.hpp"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "sage/errors.hpp"

namespace sage {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownResidue: return "UnknownResidue";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IOError: return "IOError";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NegativeLambda: return "NegativeLambda";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::InvalidDimensions: return "InvalidDimensions";
    case ErrorCode::NoBenignExamples: return "NoBenignExamples";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::EmptyRun: return "EmptyRun";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "UnknownError";
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return std::string(buf);
}

std::int64_t now_unix() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') return static_cast<std::int64_t>(v);
  }
  return static_cast<std::int64_t>(std::time(nullptr));
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return std::string(buf);
}

std::string format_full(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return std::string(buf);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IOError, "cannot open for reading: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IOError, "cannot open for writing: " + path);
  out << contents;
  if (!out) raise(ErrorCode::IOError, "short write: " + path);
}

}  // namespace sage
