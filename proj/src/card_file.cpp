#include "pairsonic/card_file.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "pairsonic/error.hpp"

namespace pairsonic::cards {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::kInvalidCard, why); }

std::string text_of(const Bytes& b) { return {b.begin(), b.end()}; }

ordered_json to_json(const wire::ContactCard& card) {
  ordered_json ext = ordered_json::object();
  for (const auto& [k, v] : card.extensions) {
    if (is_valid_utf8(v)) {
      ext[text_of(k)] = text_of(v);
    } else {
      ext[text_of(k)] = {{"hex", to_hex(v)}};
    }
  }
  return {{"name", card.name}, {"public_key", to_hex(card.public_key)}, {"extensions", std::move(ext)}};
}

wire::ContactCard from_json(const ordered_json& j) {
  if (!j.is_object()) invalid("card must be a JSON object");
  if (!j.contains("name") || !j["name"].is_string()) invalid("card needs a string \"name\"");
  if (!j.contains("public_key") || !j["public_key"].is_string()) invalid("card needs a hex \"public_key\"");
  wire::ContactCard card;
  card.name = j["name"].get<std::string>();
  auto key = from_hex(j["public_key"].get<std::string>());
  if (!key || key->size() != wire::kPublicKeySize) invalid("public_key must be 64 hex digits");
  std::copy(key->begin(), key->end(), card.public_key.begin());
  if (j.contains("extensions")) {
    const auto& ext = j["extensions"];
    if (!ext.is_object()) invalid("\"extensions\" must be an object");
    for (const auto& [k, v] : ext.items()) {
      if (v.is_string()) {
        card.set_extension(k, v.get<std::string>());
      } else if (v.is_object() && v.contains("hex") && v["hex"].is_string()) {
        auto raw = from_hex(v["hex"].get<std::string>());
        if (!raw) invalid("extension '" + k + "' has bad hex");
        card.extensions[to_bytes(k)] = *raw;
      } else {
        invalid("extension '" + k + "' must be a string");
      }
    }
  }
  wire::validate_card(card);
  return card;
}

ordered_json parse(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    invalid(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

wire::ContactCard parse_card(const std::string& json_text) { return from_json(parse(json_text)); }

std::string format_card(const wire::ContactCard& card) { return to_json(card).dump(2) + "\n"; }

std::string format_contacts(const std::vector<wire::ContactCard>& cards) {
  ordered_json list = ordered_json::array();
  for (const auto& c : cards) list.push_back(to_json(c));
  return ordered_json{{"contacts", std::move(list)}}.dump(2) + "\n";
}

std::vector<wire::ContactCard> parse_contacts(const std::string& json_text) {
  auto doc = parse(json_text);
  if (!doc.is_object() || !doc.contains("contacts") || !doc["contacts"].is_array()) {
    invalid("contacts file needs a \"contacts\" array");
  }
  std::vector<wire::ContactCard> out;
  for (const auto& c : doc["contacts"]) out.push_back(from_json(c));
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

wire::ContactCard read_card(const std::filesystem::path& path) { return parse_card(read_text(path)); }
void write_card(const std::filesystem::path& path, const wire::ContactCard& card) {
  write_text(path, format_card(card));
}
std::vector<wire::ContactCard> read_contacts(const std::filesystem::path& path) {
  return parse_contacts(read_text(path));
}
void write_contacts(const std::filesystem::path& path, const std::vector<wire::ContactCard>& cards) {
  write_text(path, format_contacts(cards));
}

}  // namespace pairsonic::cards
