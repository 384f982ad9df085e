#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "stc/tensor.hpp"

namespace stc {

// One `.sptn` file: a JSON header line followed by one entry per line
// (zero-based indices, then the value). Dense files enumerate all entries.
struct TensorFile {
  std::string name;
  std::variant<DenseTensor, SparseTensor> data;

  bool is_dense() const { return std::holds_alternative<DenseTensor>(data); }
  const Shape& shape() const;
  const DenseTensor& dense() const { return std::get<DenseTensor>(data); }
  const SparseTensor& sparse() const { return std::get<SparseTensor>(data); }
};

TensorFile read_tensor(const std::string& path);
void write_tensor(const TensorFile& file, const std::string& path);
void write_tensor(const DenseTensor& tensor, const std::string& path,
                  const std::string& name = "");
void write_tensor(const SparseTensor& tensor, const std::string& path,
                  const std::string& name = "");

// Converter for plain CSV / JSON dumps of tensor entries.
TensorFile import_dump(const std::string& path, const std::string& format);

// Shortest decimal form that parses back to the exact same double.
std::string format_value(double value);
double parse_value(std::string_view text);

// Temp file + rename; interrupted runs never leave a truncated artifact.
void atomic_write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace stc
