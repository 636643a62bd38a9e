#include "align/error.hpp"

namespace align {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Integrity: return "IntegrityError";
    case ErrorKind::Range: return "RangeError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::Norm: return "NormError";
    case ErrorKind::Transport: return "TransportError";
    case ErrorKind::Protocol: return "ProtocolError";
    case ErrorKind::MissingFrames: return "MissingFrames";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::EmptyGroupSet: return "EmptyGroupSet";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::InsufficientPool: return "InsufficientPool";
    case ErrorKind::InfeasibleAssignment: return "InfeasibleAssignment";
    case ErrorKind::OrphanResponse: return "OrphanResponse";
    case ErrorKind::Rank: return "RankError";
    case ErrorKind::DegenerateSlope: return "DegenerateSlope";
    case ErrorKind::TooFewObservations: return "TooFewObservations";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::SingleCluster: return "SingleCluster";
    case ErrorKind::TooFewDonors: return "TooFewDonors";
    case ErrorKind::FormulaMismatch: return "FormulaMismatch";
    case ErrorKind::TableLoad: return "TableLoadError";
    case ErrorKind::CsvFormat: return "CsvFormatError";
    case ErrorKind::Lineage: return "LineageError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

}  // namespace align
