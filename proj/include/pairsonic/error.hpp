#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pairsonic {

enum class ErrorCode {
  kInvalidCard,
  kMalformedCard,
  kCommitmentMismatch,
  kMalformedInner,
  kSizeMismatch,
  kDuplicateCommitment,
  kMalformedMessage,
  kMalformedOob,
  kGroupSizeOutOfBounds,
  kIgnoredEvent,
  kNotTerminal,
  kIndexOutOfRange,
  kPayloadTooLarge,
  kUncorrectableError,
  kUnsupportedWav,
  kRateMismatch,
  kConnectFailed,
  kPeerDisconnected,
  kNonQuiescent,
  kInvalidConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pairsonic
