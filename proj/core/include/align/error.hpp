#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace align {

enum class ErrorKind {
  Parse,
  Integrity,
  Range,
  Config,
  Format,
  DimMismatch,
  Norm,
  Transport,
  Protocol,
  MissingFrames,
  MissingEmbedding,
  EmptyGroupSet,
  EmptyPool,
  InsufficientPool,
  InfeasibleAssignment,
  OrphanResponse,
  Rank,
  DegenerateSlope,
  TooFewObservations,
  ZeroVariance,
  SingleCluster,
  TooFewDonors,
  FormulaMismatch,
  TableLoad,
  CsvFormat,
  Lineage,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error raised by the toolkit. `kind()` is stable and is what
/// the CLI reports in its machine-readable error object.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define ALIGN_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(Kind, message) {} \
  }

ALIGN_DEFINE_ERROR(ParseError, ErrorKind::Parse);
ALIGN_DEFINE_ERROR(IntegrityError, ErrorKind::Integrity);
ALIGN_DEFINE_ERROR(RangeError, ErrorKind::Range);
ALIGN_DEFINE_ERROR(ConfigError, ErrorKind::Config);
ALIGN_DEFINE_ERROR(FormatError, ErrorKind::Format);
ALIGN_DEFINE_ERROR(DimMismatch, ErrorKind::DimMismatch);
ALIGN_DEFINE_ERROR(NormError, ErrorKind::Norm);
ALIGN_DEFINE_ERROR(TransportError, ErrorKind::Transport);
ALIGN_DEFINE_ERROR(ProtocolError, ErrorKind::Protocol);
ALIGN_DEFINE_ERROR(MissingFrames, ErrorKind::MissingFrames);
ALIGN_DEFINE_ERROR(MissingEmbedding, ErrorKind::MissingEmbedding);
ALIGN_DEFINE_ERROR(EmptyGroupSet, ErrorKind::EmptyGroupSet);
ALIGN_DEFINE_ERROR(EmptyPool, ErrorKind::EmptyPool);
ALIGN_DEFINE_ERROR(InsufficientPool, ErrorKind::InsufficientPool);
ALIGN_DEFINE_ERROR(InfeasibleAssignment, ErrorKind::InfeasibleAssignment);
ALIGN_DEFINE_ERROR(OrphanResponse, ErrorKind::OrphanResponse);
ALIGN_DEFINE_ERROR(RankError, ErrorKind::Rank);
ALIGN_DEFINE_ERROR(DegenerateSlope, ErrorKind::DegenerateSlope);
ALIGN_DEFINE_ERROR(TooFewObservations, ErrorKind::TooFewObservations);
ALIGN_DEFINE_ERROR(ZeroVariance, ErrorKind::ZeroVariance);
ALIGN_DEFINE_ERROR(SingleCluster, ErrorKind::SingleCluster);
ALIGN_DEFINE_ERROR(TooFewDonors, ErrorKind::TooFewDonors);
ALIGN_DEFINE_ERROR(FormulaMismatch, ErrorKind::FormulaMismatch);
ALIGN_DEFINE_ERROR(TableLoadError, ErrorKind::TableLoad);
ALIGN_DEFINE_ERROR(CsvFormatError, ErrorKind::CsvFormat);
ALIGN_DEFINE_ERROR(LineageError, ErrorKind::Lineage);
ALIGN_DEFINE_ERROR(IoError, ErrorKind::Io);

#undef ALIGN_DEFINE_ERROR

}  // namespace align
