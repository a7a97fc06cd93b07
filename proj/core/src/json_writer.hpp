#pragma once

// Minimal streaming JSON writer producing canonical, whitespace-free output.
// Reals are written with 9 significant digits, which round-trips any float.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cnn_lens::detail {

class JsonWriter {
 public:
  explicit JsonWriter(std::size_t reserve = 0) { out_.reserve(reserve); }

  JsonWriter& begin_object() {
    separate();
    out_.push_back('{');
    first_.push_back(true);
    return *this;
  }
  JsonWriter& end_object() {
    out_.push_back('}');
    first_.pop_back();
    return *this;
  }
  JsonWriter& begin_array() {
    separate();
    out_.push_back('[');
    first_.push_back(true);
    return *this;
  }
  JsonWriter& end_array() {
    out_.push_back(']');
    first_.pop_back();
    return *this;
  }

  JsonWriter& key(std::string_view k) {
    separate();
    write_string(k);
    out_.push_back(':');
    pending_key_ = true;
    return *this;
  }

  JsonWriter& value(float v) {
    separate();
    write_float(v);
    return *this;
  }
  JsonWriter& value(std::size_t v) {
    separate();
    write_integer(v);
    return *this;
  }
  JsonWriter& value(int v) {
    separate();
    write_integer(v);
    return *this;
  }
  JsonWriter& value(bool v) {
    separate();
    out_ += v ? "true" : "false";
    return *this;
  }
  JsonWriter& value(std::string_view v) {
    separate();
    write_string(v);
    return *this;
  }
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }

  JsonWriter& floats(std::span<const float> values) {
    begin_array();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_.push_back(',');
      write_float(values[i]);
    }
    first_.back() = values.empty();
    return end_array();
  }

  template <typename Int>
  JsonWriter& integers(std::span<const Int> values) {
    begin_array();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_.push_back(',');
      write_integer(values[i]);
    }
    first_.back() = values.empty();
    return end_array();
  }

  JsonWriter& strings(std::span<const std::string> values) {
    begin_array();
    for (const auto& s : values) value(std::string_view(s));
    return end_array();
  }

  std::string take() { return std::move(out_); }
  const std::string& str() const noexcept { return out_; }

 private:
  void separate() {
    if (pending_key_) {
      pending_key_ = false;
      return;
    }
    if (!first_.empty()) {
      if (!first_.back()) out_.push_back(',');
      first_.back() = false;
    }
  }

  void write_float(float v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    out_.append(buf, res.ptr);
  }

  template <typename Int>
  void write_integer(Int v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out_.append(buf, res.ptr);
  }

  void write_string(std::string_view s) {
    out_.push_back('"');
    for (char ch : s) {
      const auto c = static_cast<unsigned char>(ch);
      switch (ch) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\r': out_ += "\\r"; break;
        case '\t': out_ += "\\t"; break;
        default:
          if (c < 0x20) {
            static constexpr char hex[] = "0123456789abcdef";
            out_ += "\\u00";
            out_.push_back(hex[c >> 4]);
            out_.push_back(hex[c & 0xF]);
          } else {
            out_.push_back(ch);
          }
      }
    }
    out_.push_back('"');
  }

  std::string out_;
  std::vector<bool> first_;
  bool pending_key_ = false;
};

}  // namespace cnn_lens::detail
