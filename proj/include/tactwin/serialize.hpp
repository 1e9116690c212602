#pragma once

#include <cstdint>
#include <set>
#include <string>

#include <json.hpp>

#include "tactwin/contactsim.hpp"
#include "tactwin/decoder.hpp"
#include "tactwin/errors.hpp"

namespace tactwin {

using Json = nlohmann::ordered_json;

/// Reads fields of one JSON object, rejecting unknown keys and wrong types
/// with a ConfigError naming the dotted field path.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path);

  bool has(const std::string& key) const { return j_.contains(key); }
  const Json& at(const std::string& key);

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("field '" + field(key) + "' has the wrong type");
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  /// Throws ConfigError for the first key that was never read.
  void finish() const;

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json to_json(const SensorGeometry& s);
Json to_json(const MaterialParams& m);
Json to_json(const IlluminationModel& m);
Json to_json(const SimParams& p);
Json to_json(const DecoderParams& p);
Json to_json(const ProbeSpec& p);
Json to_json(const OrientedBox& b);
/// Flat record: class, variant, score, cx_mm, cy_mm, w_mm, h_mm, theta_deg,
/// force_n and the two flags.
Json to_json(const Detection& d);
Detection detection_from_json(const Json& j);

/// Overlay the keys present in `j` onto `base`; validates the result.
void merge_json(const Json& j, const std::string& path, SensorGeometry& out);
void merge_json(const Json& j, const std::string& path, MaterialParams& out);
void merge_json(const Json& j, const std::string& path, IlluminationModel& out);
void merge_json(const Json& j, const std::string& path, SimParams& out);
void merge_json(const Json& j, const std::string& path, DecoderParams& out);

ProbeSpec probe_from_json(const Json& j, const std::string& path = "probe");

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

/// Keys sorted recursively, compact dump; stable input for hashing.
std::string canonical_dump(const Json& j);

}  // namespace tactwin
