#include "qcx/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qcx {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_field_csv(const std::string& path, const GridWaveFunction& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "dim,n,length\n"
      << f.grid.dim << ',' << f.grid.n << ',' << format_double(f.grid.length)
      << "\nindex,re,im\n";
  for (std::size_t i = 0; i < f.size(); ++i)
    out << i << ',' << format_double(f.amp[i].real()) << ','
        << format_double(f.amp[i].imag()) << '\n';
}

GridWaveFunction read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  if (line.rfind("dim,", 0) != 0)
    throw std::runtime_error(path + ": not a field snapshot file");
  std::getline(in, line);
  int dim = 0, n = 0;
  double length = 0.0;
  if (std::sscanf(line.c_str(), "%d,%d,%lf", &dim, &n, &length) != 3)
    throw std::runtime_error(path + ": malformed grid line");
  GridWaveFunction f{UniformGrid(dim, n, length)};
  std::getline(in, line);  // column header
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error(path + ": truncated field data");
    std::size_t idx;
    double re, im;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &idx, &re, &im) != 3 ||
        idx != i)
      throw std::runtime_error(path + ": malformed row " + std::to_string(i));
    f.amp[i] = cplx(re, im);
  }
  f.refresh_mask();
  return f;
}

void write_field_binary(const std::string& path, const GridWaveFunction& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  const char magic[4] = {'Q', 'C', 'X', 'F'};
  const std::uint32_t version = 1;
  const std::uint32_t dim = static_cast<std::uint32_t>(f.grid.dim);
  const std::uint32_t n = static_cast<std::uint32_t>(f.grid.n);
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&f.grid.length), 8);
  out.write(reinterpret_cast<const char*>(f.amp.data()),
            static_cast<std::streamsize>(f.size() * sizeof(cplx)));
}

GridWaveFunction read_field_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  std::uint32_t version = 0, dim = 0, n = 0;
  double length = 0.0;
  in.read(magic, 4);
  if (std::memcmp(magic, "QCXF", 4) != 0)
    throw std::runtime_error(path + ": bad magic");
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&length), 8);
  if (version != 1) throw std::runtime_error(path + ": unsupported version");
  GridWaveFunction f{UniformGrid(static_cast<int>(dim), static_cast<int>(n),
                                 length)};
  in.read(reinterpret_cast<char*>(f.amp.data()),
          static_cast<std::streamsize>(f.size() * sizeof(cplx)));
  if (!in) throw std::runtime_error(path + ": truncated data");
  f.refresh_mask();
  return f;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << header << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
}

}  // namespace qcx
