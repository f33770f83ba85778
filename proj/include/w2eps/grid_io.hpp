#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "w2eps/error.hpp"
#include "w2eps/grid.hpp"

namespace w2eps {

// PGRID v1: one text header line, then the payload in row-major order
// (last axis fastest). Functions store little-endian float64, masks one
// byte (0/1) per node; the reader tells them apart by payload length.

namespace detail {

inline std::string pgrid_header(const GridSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "PGRID v1 dim=" << spec.dim() << " shape=";
  for (std::size_t k = 0; k < spec.dim(); ++k) os << (k ? "," : "") << spec.shape()[k];
  os << " origin=";
  for (std::size_t k = 0; k < spec.dim(); ++k) os << (k ? "," : "") << spec.origin()[k];
  os << " spacing=" << spec.spacing() << '\n';
  return os.str();
}

template <class T>
std::vector<T> split_list(const std::string& s, const char* field) {
  std::vector<T> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    std::istringstream ts(tok);
    T v{};
    if (!(ts >> v)) throw FormatError(std::string("bad value in ") + field + ": " + tok);
    out.push_back(v);
  }
  return out;
}

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace detail

inline void write_pgrid(std::ostream& os, const GridFunction& f) {
  os << detail::pgrid_header(f.spec);
  for (double v : f.values) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    bits = detail::to_little_endian(bits);
    os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

inline void write_pgrid(std::ostream& os, const GridMask& m) {
  os << detail::pgrid_header(m.spec);
  os.write(reinterpret_cast<const char*>(m.flags.data()), static_cast<std::streamsize>(m.flags.size()));
}

inline GridSpec read_pgrid_header(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("missing PGRID header");
  std::istringstream hs(line);
  std::string magic, version;
  hs >> magic >> version;
  if (magic != "PGRID" || version != "v1") throw FormatError("not a PGRID v1 file");
  std::size_t dim = 0;
  std::vector<std::size_t> shape;
  Point origin;
  double spacing = 0.0;
  std::string field;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw FormatError("bad header field: " + field);
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "dim") dim = std::stoul(value);
    else if (key == "shape") shape = detail::split_list<std::size_t>(value, "shape");
    else if (key == "origin") origin = detail::split_list<double>(value, "origin");
    else if (key == "spacing") spacing = std::stod(value);
    else throw FormatError("unknown header field: " + key);
  }
  if (shape.size() != dim || origin.size() != dim) throw FormatError("header dimension mismatch");
  return GridSpec(std::move(shape), std::move(origin), spacing);
}

/// Reads either a grid function or a grid mask.
inline std::variant<GridFunction, GridMask> read_pgrid(std::istream& is) {
  GridSpec spec = read_pgrid_header(is);
  std::string payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (payload.size() == spec.size() * 8) {
    GridFunction f(spec);
    for (std::size_t i = 0; i < spec.size(); ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, payload.data() + 8 * i, 8);
      bits = detail::to_little_endian(bits);
      std::memcpy(&f.values[i], &bits, 8);
    }
    return f;
  }
  if (payload.size() == spec.size()) {
    GridMask m(spec);
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const auto b = static_cast<std::uint8_t>(payload[i]);
      if (b > 1) throw FormatError("mask byte is neither 0 nor 1");
      m.flags[i] = b;
    }
    return m;
  }
  throw FormatError("payload length matches neither a function nor a mask");
}

}  // namespace w2eps
