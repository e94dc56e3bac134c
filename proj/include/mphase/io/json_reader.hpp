#pragma once

// Strict reading of JSON objects: every key must be consumed, and every
// error names the offending field by its path.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mphase::io {

using json = nlohmann::json;

/// Invalid configuration: parse error, schema violation or violated
/// precondition. Maps to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JsonReader {
 public:
  JsonReader(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
    if (!node.is_object()) fail(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return node_->contains(key); }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_number()) fail(at(key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(at(key), "expected a finite number");
    return x;
  }

  double positive(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) fail(at(key), "must be > 0 (got " + std::to_string(x) + ")");
    return x;
  }

  double non_negative(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const double x = number(key, fallback);
    if (!(x >= 0.0)) fail(at(key), "must be >= 0 (got " + std::to_string(x) + ")");
    return x;
  }

  std::uint64_t integer(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_number_integer() || (v->is_number_integer() && v->get<std::int64_t>() < 0)) {
      fail(at(key), "expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  std::string choice(const std::string& key, std::initializer_list<const char*> allowed,
                     std::optional<std::string> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_string()) fail(at(key), "expected a string");
    const auto s = v->get<std::string>();
    std::string options;
    for (const char* a : allowed) {
      if (s == a) return s;
      options += options.empty() ? a : std::string(", ") + a;
    }
    fail(at(key), "must be one of {" + options + "} (got \"" + s + "\")");
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_string()) fail(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) {
    const json* v = lookup(key, fallback.has_value());
    if (!v) return *fallback;
    if (!v->is_array()) fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto& e = (*v)[i];
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        fail(at(key) + "[" + std::to_string(i) + "]", "expected a finite number");
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  /// Raw access for values with several accepted shapes.
  const json* raw(const std::string& key) { return lookup(key, true); }

  JsonReader object(const std::string& key) {
    const json* v = lookup(key, false);
    return JsonReader(*v, at(key));
  }

  std::optional<JsonReader> optional_object(const std::string& key) {
    const json* v = lookup(key, true);
    if (!v) return std::nullopt;
    return JsonReader(*v, at(key));
  }

  /// Reject any key that was not read.
  void finish() const {
    for (const auto& [key, value] : node_->items()) {
      (void)value;
      if (!used_.count(key)) fail(at(key), "unknown key \"" + key + "\"");
    }
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ValidationError(where + ": " + what);
  }

 private:
  const json* lookup(const std::string& key, bool optional) {
    used_.insert(key);
    const auto it = node_->find(key);
    if (it == node_->end()) {
      if (optional) return nullptr;
      fail(at(key), "required field missing");
    }
    return &*it;
  }

  const json* node_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace mphase::io
