#ifndef ASRTK_EMISSIONS_HH
#define ASRTK_EMISSIONS_HH

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace asrtk {

inline constexpr char kBlankSymbol[] = "<blank>";

// T x L natural-log label posteriors, row-major. Rows must stay normalized
// (exp sums to 1 within 1e-4) and floored at kLogFloor; files violating that
// are rejected rather than repaired.
struct EmissionMatrix {
  static constexpr double kLogFloor = -1e5;
  static constexpr double kRowSumTolerance = 1e-4;

  uint32_t frames = 0;
  uint32_t labels = 0;
  std::vector<float> values;

  float at(uint32_t t, uint32_t l) const { return values[size_t(t) * labels + l]; }

  // Throws DataError when shapes or row sums are off.
  void validate(const std::string& name) const;

  void write(std::ostream& out) const;
  static EmissionMatrix read(std::istream& in, const std::string& name);
  static EmissionMatrix load(const std::string& path);
  void save(const std::string& path) const;
};

// Ordered label strings; index = emission column. The text form is one symbol
// per line with `<blank>` first; subword inventories declare their word-start
// marker on a leading `#marker <m>` line.
struct LabelInventory {
  enum class Kind { kSubword, kPhoneme };

  std::vector<std::string> symbols;
  uint32_t blank_index = 0;
  Kind kind = Kind::kPhoneme;
  std::string marker;  // word-start marker; subword inventories only

  size_t size() const { return symbols.size(); }

  void write(std::ostream& out) const;
  static LabelInventory read(std::istream& in, const std::string& name);
  static LabelInventory load(const std::string& path);
  void save(const std::string& path) const;
};

// Natural-log label prior, floored at log 1e-10.
struct PriorVector {
  static constexpr double kFloor = 1e-10;

  std::vector<double> log_prior;

  size_t size() const { return log_prior.size(); }

  void validate(const std::string& name) const;

  void write(std::ostream& out) const;
  static PriorVector read(std::istream& in, const std::string& name);
  static PriorVector load(const std::string& path);
  void save(const std::string& path) const;
};

// Frame-average of exponentiated posteriors over every frame of every
// matrix, floored and logged. Blank is included like any other label.
PriorVector estimate_prior(std::span<const EmissionMatrix> emissions);

}  // namespace asrtk

#endif
