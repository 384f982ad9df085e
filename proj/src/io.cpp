#include "stc/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace stc {

using nlohmann::json;

const Shape& TensorFile::shape() const {
  return is_dense() ? dense().shape() : sparse().shape();
}

std::string format_value(double value) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_value(std::string_view text) {
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    fail(ErrorCode::Parse, "bad numeric value: '" + std::string(text) + "'");
  return value;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot open for writing: " + tmp.string());
    out << content;
    if (!out.flush()) fail(ErrorCode::Io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorCode::Io, "rename failed: " + target.string() + ": " + ec.message());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string header_line(const Shape& shape, int64_t count, bool dense,
                        const std::string& name) {
  json h;
  h["order"] = shape.order();
  h["shape"] = shape.dims();
  h["count"] = count;
  h["kind"] = dense ? "dense" : "sparse";
  h["name"] = name;
  return h.dump();
}

void append_entries(std::string& out, const Shape& shape,
                    std::span<const int64_t> flats, std::span<const double> values) {
  std::vector<int64_t> index(static_cast<size_t>(shape.order()));
  for (size_t i = 0; i < flats.size(); ++i) {
    shape.unravel(flats[i], index);
    for (int64_t ix : index) {
      out += std::to_string(ix);
      out += ' ';
    }
    out += format_value(values[i]);
    out += '\n';
  }
}

}  // namespace

void write_tensor(const TensorFile& file, const std::string& path) {
  std::string out;
  if (file.is_dense()) {
    const DenseTensor& t = file.dense();
    out = header_line(t.shape(), t.shape().element_count(), true, file.name);
    out += '\n';
    std::vector<int64_t> flats = all_indices(t.shape());
    append_entries(out, t.shape(), flats, t.values());
  } else {
    const SparseTensor& t = file.sparse();
    out = header_line(t.shape(), t.count(), false, file.name);
    out += '\n';
    append_entries(out, t.shape(), t.flat_indices(), t.values());
  }
  atomic_write_text(path, out);
}

void write_tensor(const DenseTensor& tensor, const std::string& path,
                  const std::string& name) {
  write_tensor(TensorFile{name, tensor}, path);
}

void write_tensor(const SparseTensor& tensor, const std::string& path,
                  const std::string& name) {
  write_tensor(TensorFile{name, tensor}, path);
}

namespace {

struct ParsedHeader {
  Shape shape;
  int64_t count = 0;
  bool dense = false;
  std::string name;
};

ParsedHeader parse_header(const std::string& line, const std::string& path) {
  json h = json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.is_object())
    fail(ErrorCode::Parse, path + ": malformed header line");
  for (const char* key : {"order", "shape", "count", "kind"})
    if (!h.contains(key)) fail(ErrorCode::Parse, path + ": header missing '" + key + "'");
  ParsedHeader out;
  if (!h["shape"].is_array() || !h["order"].is_number_integer() ||
      !h["count"].is_number_integer() || !h["kind"].is_string())
    fail(ErrorCode::Parse, path + ": malformed header field");
  std::vector<int64_t> dims = h["shape"].get<std::vector<int64_t>>();
  if (static_cast<int>(dims.size()) != h["order"].get<int>())
    fail(ErrorCode::Parse, path + ": order does not match shape");
  out.shape = Shape(std::move(dims));
  out.count = h["count"].get<int64_t>();
  const std::string kind = h["kind"].get<std::string>();
  if (kind == "dense") {
    out.dense = true;
  } else if (kind == "sparse") {
    out.dense = false;
  } else {
    fail(ErrorCode::Parse, path + ": unknown kind '" + kind + "'");
  }
  if (h.contains("name") && h["name"].is_string()) out.name = h["name"].get<std::string>();
  return out;
}

}  // namespace

TensorFile read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Parse, path + ": empty file");
  ParsedHeader header = parse_header(line, path);

  const int order = header.shape.order();
  std::vector<int64_t> flats;
  std::vector<double> values;
  flats.reserve(static_cast<size_t>(header.count));
  values.reserve(static_cast<size_t>(header.count));
  std::vector<int64_t> index(static_cast<size_t>(order));
  int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    for (int n = 0; n < order; ++n) {
      if (!(ls >> token))
        fail(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": truncated entry");
      int64_t ix = 0;
      auto res = std::from_chars(token.data(), token.data() + token.size(), ix);
      if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        fail(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": bad index");
      index[static_cast<size_t>(n)] = ix;
    }
    if (!(ls >> token))
      fail(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": missing value");
    const double v = parse_value(token);
    flats.push_back(header.shape.ravel(index));  // throws IndexOutOfBounds
    values.push_back(v);
  }
  if (static_cast<int64_t>(flats.size()) != header.count)
    fail(ErrorCode::Parse, path + ": header count " + std::to_string(header.count) +
                               " does not match " + std::to_string(flats.size()) + " entries");

  // SparseTensor construction rejects duplicates and non-finite values.
  SparseTensor entries(header.shape, std::move(flats), std::move(values));
  if (!header.dense) return TensorFile{header.name, std::move(entries)};

  if (entries.count() != header.shape.element_count())
    fail(ErrorCode::Parse, path + ": dense file must enumerate all entries");
  return TensorFile{header.name, DenseTensor(header.shape, entries.values())};
}

namespace {

TensorFile import_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open: " + path);
  // First line: "# shape I1 I2 ... [dense|sparse] [name]"
  std::string line;
  if (!std::getline(in, line) || line.rfind("# shape", 0) != 0)
    fail(ErrorCode::Parse, path + ": csv dump must start with '# shape ...'");
  std::istringstream hs(line.substr(7));
  std::vector<int64_t> dims;
  std::string tok;
  std::string kind = "sparse";
  std::string name;
  while (hs >> tok) {
    if (tok == "dense" || tok == "sparse") {
      kind = tok;
    } else if (!tok.empty() && (std::isdigit(static_cast<unsigned char>(tok[0])))) {
      dims.push_back(std::stoll(tok));
    } else {
      name = tok;
    }
  }
  Shape shape(dims);
  std::vector<int64_t> flats;
  std::vector<double> values;
  std::vector<int64_t> index(static_cast<size_t>(shape.order()));
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    for (int n = 0; n < shape.order(); ++n) {
      if (!std::getline(ls, cell, ',')) fail(ErrorCode::Parse, path + ": short csv row");
      index[static_cast<size_t>(n)] = std::stoll(cell);
    }
    if (!std::getline(ls, cell, ',')) fail(ErrorCode::Parse, path + ": csv row missing value");
    flats.push_back(shape.ravel(index));
    values.push_back(parse_value(cell));
  }
  SparseTensor entries(shape, std::move(flats), std::move(values));
  if (kind == "dense") {
    if (entries.count() != shape.element_count())
      fail(ErrorCode::Parse, path + ": dense csv dump must enumerate all entries");
    return TensorFile{name, DenseTensor(shape, entries.values())};
  }
  return TensorFile{name, std::move(entries)};
}

TensorFile import_json(const std::string& path) {
  json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorCode::Parse, path + ": malformed json dump");
  if (!j.contains("shape") || !j.contains("entries"))
    fail(ErrorCode::Parse, path + ": json dump needs 'shape' and 'entries'");
  Shape shape(j["shape"].get<std::vector<int64_t>>());
  std::vector<int64_t> flats;
  std::vector<double> values;
  for (const auto& e : j["entries"]) {
    if (!e.is_array() || static_cast<int>(e.size()) != shape.order() + 1)
      fail(ErrorCode::Parse, path + ": each entry must be [i1, ..., iN, value]");
    std::vector<int64_t> index;
    for (int n = 0; n < shape.order(); ++n) index.push_back(e[static_cast<size_t>(n)].get<int64_t>());
    flats.push_back(shape.ravel(index));
    values.push_back(e[static_cast<size_t>(shape.order())].get<double>());
  }
  SparseTensor entries(shape, std::move(flats), std::move(values));
  const std::string kind = j.value("kind", std::string("sparse"));
  const std::string name = j.value("name", std::string());
  if (kind == "dense") {
    if (entries.count() != shape.element_count())
      fail(ErrorCode::Parse, path + ": dense json dump must enumerate all entries");
    return TensorFile{name, DenseTensor(shape, entries.values())};
  }
  return TensorFile{name, std::move(entries)};
}

}  // namespace

TensorFile import_dump(const std::string& path, const std::string& format) {
  if (format == "csv") return import_csv(path);
  if (format == "json") return import_json(path);
  fail(ErrorCode::InvalidArgument, "import: unknown format '" + format + "'");
}

}  // namespace stc
