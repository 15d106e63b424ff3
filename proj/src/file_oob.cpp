#include "pairsonic/file_oob.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <vector>

#include "pairsonic/error.hpp"
#include "pairsonic/wav.hpp"

namespace pairsonic::transport {

namespace fs = std::filesystem;

bool is_oob_file_name(const std::string& name) {
  if (name.size() < 12 || !name.starts_with("oob-") || !name.ends_with(".wav")) return false;
  return std::all_of(name.begin() + 4, name.end() - 4, [](unsigned char c) { return std::isdigit(c); });
}

FileOobChannel::FileOobChannel(fs::path dir, modem::ModemConfig config, std::optional<fs::path> tx_dir,
                               Diagnostic diagnostic)
    : dir_(std::move(dir)),
      tx_dir_(tx_dir.value_or(dir_)),
      modem_(config),
      diagnostic_(diagnostic ? std::move(diagnostic) : [](const std::string& m) { std::cerr << m << '\n'; }) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  fs::create_directories(tx_dir_, ec);
  if (!fs::is_directory(dir_) || !fs::is_directory(tx_dir_)) {
    throw Error(ErrorCode::kIo, "OOB directory unavailable: " + dir_.string());
  }
}

fs::path FileOobChannel::emit_file(ByteView payload) {
  // Write privately, then claim the next free number with link(), which
  // fails rather than overwrite when another process got there first.
  fs::path tmp = tx_dir_ / (".oob-tmp-" + std::to_string(::getpid()) + "-" + std::to_string(emitted_++));
  wav::write(tmp, modem_.modulate(payload));
  int number = 1;
  for (const auto& entry : fs::directory_iterator(tx_dir_)) {
    std::string name = entry.path().filename().string();
    if (is_oob_file_name(name)) number = std::max(number, std::stoi(name.substr(4, name.size() - 8)) + 1);
  }
  for (;; ++number) {
    char name[32];
    std::snprintf(name, sizeof name, "oob-%04d.wav", number);
    fs::path target = tx_dir_ / name;
    if (::link(tmp.c_str(), target.c_str()) == 0) {
      fs::remove(tmp);
      return target;
    }
    if (errno != EEXIST) {
      std::string why = std::strerror(errno);
      fs::remove(tmp);
      throw Error(ErrorCode::kIo, "cannot publish " + target.string() + ": " + why);
    }
  }
}

std::vector<Bytes> FileOobChannel::poll() {
  std::vector<std::string> fresh;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    std::string name = entry.path().filename().string();
    if (is_oob_file_name(name) && !seen_.count(name)) fresh.push_back(name);
  }
  std::sort(fresh.begin(), fresh.end(), [](const std::string& a, const std::string& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });

  std::vector<Bytes> out;
  for (const auto& name : fresh) {
    seen_.insert(name);
    try {
      for (auto& frame : modem_.demodulate(wav::read(dir_ / name))) out.push_back(std::move(frame.payload));
    } catch (const Error& e) {
      diagnostic_("skipping " + name + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pairsonic::transport
