#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace outact {

/// Flat `key = value` file. Blank lines and text after '#' are ignored.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in);
  static KeyValues load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(std::string key, std::string value);

  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  /// Comma-separated list; `fallback` when the key is absent.
  std::vector<std::string> get_list(std::string_view key,
                                    std::vector<std::string> fallback) const;

  std::vector<std::size_t> get_size_list(std::string_view key,
                                         std::vector<std::size_t> fallback) const;

  /// Throws ContractError naming the first key not in `known`.
  void require_known(const std::vector<std::string_view>& known) const;

  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  const std::string* find(std::string_view key) const;
  std::map<std::string, std::string, std::less<>> entries_;
};

}  // namespace outact
