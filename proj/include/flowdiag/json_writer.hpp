#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace flowdiag {

// Shortest decimal form that reparses to the same binary double (17
// significant digits). Non-finite values have no JSON representation and are
// emitted as null by JsonWriter::value.
std::string format_double(double v);

// Streaming JSON emitter. Keys keep insertion order and numbers use
// format_double, so a given call sequence yields byte identical output.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view k);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view s);
  JsonWriter& value(const char* s) { return value(std::string_view(s)); }
  JsonWriter& null();

  const std::string& str() const { return out_; }

 private:
  void separate();
  void raw(std::string_view s);
  void write_string(std::string_view s);

  std::string out_;
  std::vector<bool> first_in_scope_;
  bool after_key_ = false;
};

}  // namespace flowdiag
