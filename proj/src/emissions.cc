#include "asrtk/emissions.hh"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "asrtk/util.hh"

namespace asrtk {
namespace {

constexpr char kEmissionMagic[5] = {'E', 'M', 'I', 'T', '1'};

}  // namespace

void EmissionMatrix::validate(const std::string& name) const {
  if (values.size() != size_t(frames) * labels) {
    throw DataError(name + ": emission value count " +
                    std::to_string(values.size()) + " does not match " +
                    std::to_string(frames) + "x" + std::to_string(labels));
  }
  if (frames > 0 && labels == 0) {
    throw DataError(name + ": emission frames carry zero labels");
  }
  for (uint32_t t = 0; t < frames; ++t) {
    double sum = 0.0;
    for (uint32_t l = 0; l < labels; ++l) {
      const float v = at(t, l);
      if (!std::isfinite(v) || v > 0.0f || v < kLogFloor) {
        throw DataError(name + ": frame " + std::to_string(t) + " label " +
                        std::to_string(l) + " holds invalid log posterior " +
                        std::to_string(v));
      }
      sum += std::exp(double(v));
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw DataError(name + ": frame " + std::to_string(t) +
                      " posteriors sum to " + std::to_string(sum) +
                      "; refusing to renormalize");
    }
  }
}

void EmissionMatrix::write(std::ostream& out) const {
  out.write(kEmissionMagic, sizeof(kEmissionMagic));
  put_u32(out, frames);
  put_u32(out, labels);
  for (float v : values) put_f32(out, v);
}

EmissionMatrix EmissionMatrix::read(std::istream& in, const std::string& name) {
  char magic[sizeof(kEmissionMagic)];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) ||
      std::string_view(magic, sizeof(magic)) !=
          std::string_view(kEmissionMagic, sizeof(kEmissionMagic))) {
    throw DataError(name + ": not an EMIT1 emission file");
  }
  EmissionMatrix em;
  em.frames = get_u32(in, name + " frame count");
  em.labels = get_u32(in, name + " label count");
  const uint64_t want = uint64_t(em.frames) * em.labels;
  if (want > (uint64_t(1) << 31)) {
    throw DataError(name + ": emission matrix " + std::to_string(em.frames) +
                    "x" + std::to_string(em.labels) + " is implausibly large");
  }
  em.values.reserve(size_t(want));
  for (uint64_t i = 0; i < want; ++i) {
    em.values.push_back(get_f32(in, name + " emission values"));
  }
  em.validate(name);
  return em;
}

EmissionMatrix EmissionMatrix::load(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  in >> std::noskipws;
  EmissionMatrix em = read(in, path);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(path + ": trailing bytes after emission matrix");
  }
  return em;
}

void EmissionMatrix::save(const std::string& path) const {
  validate(path);
  std::ofstream out;
  open_out_or_throw(out, path, /*binary=*/true);
  write(out);
  if (!out) throw IoError("failed writing " + path);
}

void LabelInventory::write(std::ostream& out) const {
  if (kind == Kind::kSubword) out << "#marker " << marker << "\n";
  for (const std::string& s : symbols) out << s << "\n";
}

LabelInventory LabelInventory::read(std::istream& in, const std::string& name) {
  LabelInventory inv;
  std::string line;
  uint64_t line_no = 0;
  bool saw_symbol = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#marker", 0) == 0) {
      if (saw_symbol) {
        throw ParseError(name, line_no, "marker line must precede the symbols");
      }
      const std::string m = trim(line.substr(7));
      if (m.empty()) throw ParseError(name, line_no, "empty word-start marker");
      inv.kind = Kind::kSubword;
      inv.marker = m;
      continue;
    }
    if (trim(line).empty()) {
      throw ParseError(name, line_no, "blank line in label inventory");
    }
    if (line != trim(line)) {
      throw ParseError(name, line_no, "label carries surrounding whitespace");
    }
    if (!saw_symbol && line != kBlankSymbol) {
      throw ParseError(name, line_no,
                       std::string("first label must be ") + kBlankSymbol);
    }
    saw_symbol = true;
    inv.symbols.push_back(line);
  }
  if (!saw_symbol) throw DataError(name + ": empty label inventory");
  for (size_t i = 0; i < inv.symbols.size(); ++i) {
    for (size_t j = i + 1; j < inv.symbols.size(); ++j) {
      if (inv.symbols[i] == inv.symbols[j]) {
        throw DataError(name + ": duplicate label " + inv.symbols[i]);
      }
    }
  }
  inv.blank_index = 0;
  return inv;
}

LabelInventory LabelInventory::load(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read(in, path);
}

void LabelInventory::save(const std::string& path) const {
  std::ofstream out;
  open_out_or_throw(out, path);
  write(out);
  if (!out) throw IoError("failed writing " + path);
}

void PriorVector::validate(const std::string& name) const {
  const double floor_log = std::log(kFloor);
  double sum = 0.0;
  for (size_t i = 0; i < log_prior.size(); ++i) {
    const double v = log_prior[i];
    if (!std::isfinite(v) || v > 0.0 || v < floor_log - 1e-9) {
      throw DataError(name + ": label " + std::to_string(i) +
                      " holds invalid log prior " + std::to_string(v));
    }
    sum += std::exp(v);
  }
  if (log_prior.empty() || std::abs(sum - 1.0) > 1e-4) {
    throw DataError(name + ": prior masses sum to " + std::to_string(sum));
  }
}

void PriorVector::write(std::ostream& out) const {
  for (double v : log_prior) out << format_sig(v, 17) << "\n";
}

PriorVector PriorVector::read(std::istream& in, const std::string& name) {
  PriorVector prior;
  std::string line;
  uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      throw ParseError(name, line_no, "blank line in prior file");
    }
    try {
      size_t used = 0;
      const double v = std::stod(line, &used);
      if (used != line.size()) throw std::invalid_argument("trailing");
      prior.log_prior.push_back(v);
    } catch (const std::exception&) {
      throw ParseError(name, line_no, "expected one log prior per line");
    }
  }
  prior.validate(name);
  return prior;
}

PriorVector PriorVector::load(const std::string& path) {
  std::ifstream in;
  open_or_throw(in, path);
  return read(in, path);
}

void PriorVector::save(const std::string& path) const {
  validate(path);
  std::ofstream out;
  open_out_or_throw(out, path);
  write(out);
  if (!out) throw IoError("failed writing " + path);
}

PriorVector estimate_prior(std::span<const EmissionMatrix> emissions) {
  uint64_t total_frames = 0;
  uint32_t labels = 0;
  for (const EmissionMatrix& em : emissions) {
    if (em.frames == 0) continue;
    if (labels == 0) {
      labels = em.labels;
    } else if (em.labels != labels) {
      throw DataError("prior estimation saw matrices with " +
                      std::to_string(labels) + " and " +
                      std::to_string(em.labels) + " labels");
    }
    total_frames += em.frames;
  }
  if (total_frames == 0) {
    throw DataError("prior estimation needs at least one emission frame");
  }
  std::vector<double> mass(labels, 0.0);
  for (const EmissionMatrix& em : emissions) {
    for (uint32_t t = 0; t < em.frames; ++t) {
      for (uint32_t l = 0; l < labels; ++l) {
        mass[l] += std::exp(double(em.at(t, l)));
      }
    }
  }
  PriorVector prior;
  prior.log_prior.resize(labels);
  for (uint32_t l = 0; l < labels; ++l) {
    const double p = mass[l] / double(total_frames);
    prior.log_prior[l] = std::log(std::max(p, PriorVector::kFloor));
  }
  return prior;
}

}  // namespace asrtk
