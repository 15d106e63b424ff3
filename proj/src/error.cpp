#include "pairsonic/error.hpp"

namespace pairsonic {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidCard: return "InvalidCard";
    case ErrorCode::kMalformedCard: return "MalformedCard";
    case ErrorCode::kCommitmentMismatch: return "CommitmentMismatch";
    case ErrorCode::kMalformedInner: return "MalformedInner";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kDuplicateCommitment: return "DuplicateCommitment";
    case ErrorCode::kMalformedMessage: return "MalformedMessage";
    case ErrorCode::kMalformedOob: return "MalformedOob";
    case ErrorCode::kGroupSizeOutOfBounds: return "GroupSizeOutOfBounds";
    case ErrorCode::kIgnoredEvent: return "IgnoredEvent";
    case ErrorCode::kNotTerminal: return "NotTerminal";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kPayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::kUncorrectableError: return "UncorrectableError";
    case ErrorCode::kUnsupportedWav: return "UnsupportedWav";
    case ErrorCode::kRateMismatch: return "RateMismatch";
    case ErrorCode::kConnectFailed: return "ConnectFailed";
    case ErrorCode::kPeerDisconnected: return "PeerDisconnected";
    case ErrorCode::kNonQuiescent: return "NonQuiescent";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace pairsonic
