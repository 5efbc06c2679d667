#pragma once

#include <string>

#include "qcx/grid.hpp"

namespace qcx {

// Field snapshot files. CSV layout:
//   dim,n,length
//   <dim>,<n>,<length>
//   index,re,im
//   0,<re>,<im>
//   ...
// Binary layout (little-endian): magic "QCXF", u32 version = 1, u32 dim,
// u32 n, f64 length, then n^dim (re, im) f64 pairs in row-major order.
void write_field_csv(const std::string& path, const GridWaveFunction& f);
GridWaveFunction read_field_csv(const std::string& path);
void write_field_binary(const std::string& path, const GridWaveFunction& f);
GridWaveFunction read_field_binary(const std::string& path);

// generic CSV writer: header line then rows of doubles at full precision
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

std::string format_double(double v);

}  // namespace qcx
