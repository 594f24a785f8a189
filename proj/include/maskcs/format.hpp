#ifndef MASKCS_FORMAT_HPP
#define MASKCS_FORMAT_HPP

#include <cmath>
#include <concepts>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace maskcs {

/// %.<digits>g, with "inf", "-inf" and "nan" spelled out portably.
inline std::string format_double(double v, int digits = 6) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

/// Ordered key=value record, one pair per line.
class KeyValueRecord {
 public:
  KeyValueRecord& add(std::string key, std::string value) {
    items_.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  KeyValueRecord& add(std::string key, double value, int digits = 10) {
    return add(std::move(key), format_double(value, digits));
  }
  template <std::integral T>
  KeyValueRecord& add(std::string key, T value) {
    if constexpr (std::same_as<T, bool>)
      return add(std::move(key), std::string(value ? "true" : "false"));
    else
      return add(std::move(key), std::to_string(value));
  }
  KeyValueRecord& append(const KeyValueRecord& other) {
    items_.insert(items_.end(), other.items_.begin(), other.items_.end());
    return *this;
  }

  const std::vector<std::pair<std::string, std::string>>& items() const noexcept { return items_; }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : items_) out += k + "=" + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace maskcs

#endif  // MASKCS_FORMAT_HPP
