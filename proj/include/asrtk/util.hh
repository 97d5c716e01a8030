#ifndef ASRTK_UTIL_HH
#define ASRTK_UTIL_HH

#include <cstdint>
#include <functional>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace asrtk {

// Error taxonomy shared by all stages. The CLI maps these to exit code 1;
// command-line misuse is handled separately and exits 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Parse failure in a structured text file; carries file name and line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, uint64_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}
  const std::string& file() const { return file_; }
  uint64_t line() const { return line_; }

 private:
  std::string file_;
  uint64_t line_;
};

std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split_char(std::string_view s, char sep);
std::string trim(std::string_view s);
std::string to_upper(const std::string& s);
std::string to_lower(const std::string& s);

// Splits a UTF-8 string into code points; invalid bytes pass through singly.
std::vector<std::string> utf8_codepoints(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Visits every non-empty meaning-bearing line; returns the number of lines
// seen (including empty ones, so callers can report positions).
uint64_t for_each_line(std::istream& in,
                       const std::function<void(const std::string&)>& fn);

// Opens for reading or throws IoError naming the path.
void open_or_throw(std::ifstream& in, const std::string& path);
void open_out_or_throw(std::ofstream& out, const std::string& path,
                       bool binary = false);

// Runs fn(0..n-1) on up to `workers` threads. workers <= 0 means one per
// hardware core. Exceptions from fn are rethrown on the calling thread.
void parallel_for(size_t n, int workers,
                  const std::function<void(size_t)>& fn);

// Formats a double with the given number of significant digits ("%.*g"),
// normalizing negative zero.
std::string format_sig(double v, int digits);

// Little-endian scalar I/O for the binary container formats. Readers throw
// IoError mentioning `what` when the stream runs short.
void put_u32(std::ostream& out, uint32_t v);
void put_f32(std::ostream& out, float v);
void put_f64(std::ostream& out, double v);
uint32_t get_u32(std::istream& in, const std::string& what);
float get_f32(std::istream& in, const std::string& what);
double get_f64(std::istream& in, const std::string& what);

}  // namespace asrtk

#endif
