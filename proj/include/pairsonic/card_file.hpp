#pragma once

// JSON forms of contact cards:
//
//   {"name": "Alice", "public_key": "<64 hex digits>",
//    "extensions": {"phone": "+1 555 0100"}}
//
// Extension values that are not UTF-8 are written as {"hex": "..."}.
// A contacts file is {"contacts": [card, ...]}.

#include <filesystem>
#include <string>
#include <vector>

#include "pairsonic/wire.hpp"

namespace pairsonic::cards {

/// Throws Error(kInvalidCard) for malformed JSON or an invalid card.
wire::ContactCard parse_card(const std::string& json_text);
std::string format_card(const wire::ContactCard& card);

std::string format_contacts(const std::vector<wire::ContactCard>& cards);
std::vector<wire::ContactCard> parse_contacts(const std::string& json_text);

/// Throw Error(kIo) on filesystem failures.
wire::ContactCard read_card(const std::filesystem::path& path);
void write_card(const std::filesystem::path& path, const wire::ContactCard& card);
std::vector<wire::ContactCard> read_contacts(const std::filesystem::path& path);
void write_contacts(const std::filesystem::path& path, const std::vector<wire::ContactCard>& cards);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace pairsonic::cards
