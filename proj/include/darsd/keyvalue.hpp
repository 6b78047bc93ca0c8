#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace darsd {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct KeyValueEntry {
  std::string value;
  std::size_t line = 0;
};

// `key = value` per line; `#` starts a comment; blank lines ignored.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& source) {
    KeyValueFile kv;
    kv.source_ = source;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
      ++line;
      if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      const std::string text = trim(raw);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos) throw ParseError(source, line, "expected key = value");
      std::string key = trim(text.substr(0, eq));
      std::string value = trim(text.substr(eq + 1));
      if (key.empty()) throw ParseError(source, line, "empty key");
      if (kv.entries_.count(key)) throw ParseError(source, line, "duplicate key '" + key + "'");
      kv.entries_[key] = {value, line};
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return parse(in, path);
  }

  const std::string& source() const { return source_; }
  const std::map<std::string, KeyValueEntry>& entries() const { return entries_; }

  // Entries under `prefix` with the prefix stripped.
  KeyValueFile section(const std::string& prefix) const {
    KeyValueFile kv;
    kv.source_ = source_;
    for (const auto& [key, entry] : entries_)
      if (key.starts_with(prefix)) kv.entries_[key.substr(prefix.size())] = entry;
    return kv;
  }

  // Entries not under `prefix`.
  KeyValueFile excluding(const std::string& prefix) const {
    KeyValueFile kv;
    kv.source_ = source_;
    for (const auto& [key, entry] : entries_)
      if (!key.starts_with(prefix)) kv.entries_[key] = entry;
    return kv;
  }

  // Throws on any key not in `known`.
  void require_known(const std::vector<std::string>& known) const {
    for (const auto& [key, entry] : entries_) {
      bool found = false;
      for (const auto& k : known) found = found || k == key;
      if (!found) throw ParseError(source_, entry.line, "unknown key '" + key + "'");
    }
  }

  template <typename T>
  bool get(const std::string& key, T& out) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return false;
    out = convert<T>(it->second, key);
    return true;
  }

  template <typename T>
  T convert(const KeyValueEntry& e, const std::string& key) const {
    const std::string& v = e.value;
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "1" || v == "true" || v == "on") return true;
      if (v == "0" || v == "false" || v == "off") return false;
      throw ParseError(source_, e.line, "'" + key + "' expects a boolean");
    } else if constexpr (std::is_same_v<T, std::vector<double>> ||
                         std::is_same_v<T, std::vector<std::size_t>>) {
      T out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        out.push_back(convert<typename T::value_type>({trim(item), e.line}, key));
      }
      return out;
    } else {
      T out{};
      const char* first = v.data();
      const char* last = v.data() + v.size();
      auto [ptr, ec] = std::from_chars(first, last, out);
      if (ec != std::errc() || ptr != last) {
        throw ParseError(source_, e.line, "'" + key + "' has malformed value '" + v + "'");
      }
      return out;
    }
  }

 private:
  std::string source_;
  std::map<std::string, KeyValueEntry> entries_;
};

}  // namespace darsd
