#include "pairsonic/pairing.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <istream>
#include <map>
#include <memory>
#include <ostream>

#include "pairsonic/card_file.hpp"
#include "pairsonic/error.hpp"
#include "pairsonic/file_oob.hpp"
#include "pairsonic/random.hpp"
#include "pairsonic/tcp.hpp"

namespace pairsonic::pairing {

namespace {

using Clock = std::chrono::steady_clock;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::string ask(std::ostream& out, std::istream& in, const std::string& prompt) {
  out << prompt << std::flush;
  std::string line;
  if (!std::getline(in, line)) return {};
  auto first = line.find_first_not_of(" \t\r");
  auto last = line.find_last_not_of(" \t\r");
  return first == std::string::npos ? std::string() : line.substr(first, last - first + 1);
}

std::vector<wire::ContactCard> select(const std::vector<wire::ContactCard>& cards, const ImportSelection& sel) {
  std::vector<wire::ContactCard> out;
  for (std::size_t i = 0; i < cards.size(); ++i) {
    bool take = sel.mode == ImportSelection::Mode::kAll ||
                (sel.mode == ImportSelection::Mode::kIndices && sel.indices.count(i) != 0);
    if (take) out.push_back(cards[i]);
  }
  return out;
}

}  // namespace

ExitCode exit_code_for(const protocol::Outcome& outcome) {
  const auto* aborted = std::get_if<protocol::Aborted>(&outcome);
  if (!aborted) return ExitCode::kOk;
  switch (aborted->reason) {
    case wire::AbortReason::kTimeout: return ExitCode::kTimeout;
    case wire::AbortReason::kUserDeclined: return ExitCode::kUserDeclined;
    case wire::AbortReason::kOobMismatch:
    case wire::AbortReason::kIntegrityFailure: return ExitCode::kIntegrity;
  }
  return ExitCode::kFailure;
}

ImportSelection parse_import_selection(std::string_view text) {
  if (text == "all") return {ImportSelection::Mode::kAll, {}};
  if (text == "none") return {ImportSelection::Mode::kNone, {}};
  ImportSelection sel{ImportSelection::Mode::kIndices, {}};
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    auto item = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      throw Error(ErrorCode::kInvalidConfig, "import selection must be all, none or indices like 0,2");
    }
    sel.indices.insert(v);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return sel;
}

PairResult run_pairing(const PairOptions& options, std::ostream& out, std::istream& in) {
  std::unique_ptr<RandomSource> rng;
  if (options.seed) {
    rng = std::make_unique<SeededRandom>(*options.seed);
  } else {
    rng = std::make_unique<SystemRandom>();
  }

  const bool coordinator = options.role == protocol::Role::kCoordinator;
  transport::TcpChannel channel = coordinator ? transport::TcpChannel::listen(options.listen) : transport::TcpChannel();
  transport::FileOobChannel oob(options.oob_dir, options.modem, options.oob_tx_dir,
                                [&out](const std::string& m) { out << "oob: " << m << "\n"; });

  std::unique_ptr<protocol::Session> session;
  protocol::Actions initial;
  if (coordinator) {
    auto [s, a] = protocol::CoordinatorSession::create(options.protocol, options.group_size, options.card,
                                                       channel.descriptor(), *rng);
    session = std::make_unique<protocol::CoordinatorSession>(std::move(s));
    initial = std::move(a);
    out << "Coordinating a group of " << options.group_size << " on " << channel.descriptor() << "\n";
  } else {
    auto [s, a] = protocol::ParticipantSession::create(options.protocol, options.card, *rng);
    session = std::make_unique<protocol::ParticipantSession>(std::move(s));
    initial = std::move(a);
    out << "Listening for a pairing announcement in " << options.oob_dir.string() << "\n";
  }

  PairResult result{protocol::Aborted{}, {}, channel.descriptor()};
  std::deque<protocol::Event> pending;
  std::map<protocol::TimerId, Clock::time_point> timers;

  auto apply = [&](const protocol::Actions& actions) {
    for (const auto& action : actions) {
      std::visit(
          Overloaded{
              [&](const protocol::action::Send& a) {
                try {
                  channel.send(a.peer, wire::encode_message(a.message));
                } catch (const Error& e) {
                  out << "send failed: " << e.what() << "\n";
                }
              },
              [&](const protocol::action::Broadcast& a) { channel.broadcast(wire::encode_message(a.message)); },
              [&](const protocol::action::EmitOob& a) {
                Bytes payload = wire::encode_oob(a.payload);
                oob.emit(payload);
                out << "Playing " << (std::holds_alternative<wire::oob::Init>(a.payload) ? "INIT" : "VERIFY")
                    << " tones (" << modem::airtime_seconds(options.modem, payload.size()) << " s)\n";
              },
              [&](const protocol::action::SetTimer& a) { timers[a.timer] = Clock::now() + a.duration; },
              [&](const protocol::action::CancelTimer& a) { timers.erase(a.timer); },
              [&](const protocol::action::Connect& a) {
                try {
                  pending.push_back(protocol::event::PeerConnected{channel.connect(a.descriptor)});
                  out << "Connected to " << a.descriptor << "\n";
                } catch (const Error& e) {
                  // The round timer turns this into a timeout abort.
                  out << "cannot reach coordinator: " << e.what() << "\n";
                }
              },
              [&](const protocol::action::DisplayLock&) {
                std::size_t n = session->group_size();
                out << "\n  [ LOCK ]  This device shows the lock.\n";
                bool yes = true;
                if (options.auto_confirm) {
                  out << "All " << n << " devices show the lock? [y/n] y (auto)\n";
                } else {
                  std::string answer = ask(out, in, "All " + std::to_string(n) + " devices show the lock? [y/n] ");
                  yes = answer == "y" || answer == "Y" || answer == "yes";
                }
                pending.push_back(protocol::event::UserConfirmed{yes});
              },
              [&](const protocol::action::DisplayContacts& a) {
                out << "Pairing finished. Group roster:\n";
                for (std::size_t i = 0; i < a.cards.size(); ++i) {
                  out << "  " << i << ". " << a.cards[i].name << "  " << to_hex(a.cards[i].public_key) << "\n";
                }
              },
              [&](const protocol::action::DisplayAbort& a) {
                out << "Pairing aborted: " << wire::to_string(a.reason) << "\n";
              },
              [&](const protocol::action::ImportContacts& a) {
                ImportSelection sel = options.import;
                if (sel.mode == ImportSelection::Mode::kAsk) {
                  if (options.auto_confirm) {
                    sel.mode = ImportSelection::Mode::kAll;
                  } else {
                    std::string answer = ask(out, in, "Import which contacts? [all/none/indices, default all] ");
                    try {
                      sel = answer.empty() ? ImportSelection{ImportSelection::Mode::kAll, {}}
                                           : parse_import_selection(answer);
                    } catch (const Error&) {
                      out << "unrecognised selection, importing none\n";
                      sel.mode = ImportSelection::Mode::kNone;
                    }
                  }
                }
                result.imported = select(a.cards, sel);
                if (options.contacts_out) cards::write_contacts(*options.contacts_out, result.imported);
                out << "Imported " << result.imported.size() << " contact(s)\n";
              },
          },
          action);
    }
  };

  apply(initial);
  while (!session->is_terminal()) {
    if (!pending.empty()) {
      protocol::Event e = std::move(pending.front());
      pending.pop_front();
      apply(session->handle_event(e));
      continue;
    }
    auto now = Clock::now();
    auto due = std::min_element(timers.begin(), timers.end(),
                                [](const auto& a, const auto& b) { return a.second < b.second; });
    if (due != timers.end() && due->second <= now) {
      pending.push_back(protocol::event::TimerFired{due->first});
      timers.erase(due);
      continue;
    }
    for (auto& payload : oob.poll()) {
      try {
        pending.push_back(protocol::event::OobReceived{wire::decode_oob(payload)});
      } catch (const Error& e) {
        out << "oob: ignoring undecodable payload: " << e.what() << "\n";
      }
    }
    if (!pending.empty()) continue;

    auto wait = options.poll_interval;
    if (due != timers.end()) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(due->second - now);
      wait = std::clamp(left, std::chrono::milliseconds(0), wait);
    }
    if (auto incoming = channel.receive(wait)) {
      using Kind = transport::Incoming::Kind;
      switch (incoming->kind) {
        case Kind::kConnected: pending.push_back(protocol::event::PeerConnected{incoming->peer}); break;
        case Kind::kData: pending.push_back(protocol::event_from_bytes(incoming->peer, incoming->bytes)); break;
        case Kind::kDisconnected: out << "peer " << incoming->peer << " disconnected\n"; break;
      }
    }
  }

  result.outcome = session->outcome();
  channel.close_gracefully(std::chrono::milliseconds(1500));
  return result;
}

}  // namespace pairsonic::pairing
