#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ngraph::util {

/// Malformed on-disk data. The message names the offending field path or
/// byte offset.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws FormatError on characters outside the alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text, const std::string& field);

/// float64 values as little-endian bytes, base64 encoded.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view text, const std::string& field);

void append_doubles_le(std::vector<std::uint8_t>& out, std::span<const double> values);
void append_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v);
double read_double_le(const std::uint8_t* p);
std::uint64_t read_u64_le(const std::uint8_t* p);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);
/// Throws FormatError naming `field` when `text` is not a complete number.
double parse_double(std::string_view text, const std::string& field);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace ngraph::util
