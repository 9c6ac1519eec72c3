#include "qtag/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qtag/preprocess.hpp"

namespace qtag {

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

Dataset read_dataset(std::istream& in, bool lenient) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw FormatError("dataset: missing role header");
  ++line_no;
  line = strip_cr(line);
  const std::string prefix = "# role:";
  if (line.rfind(prefix, 0) != 0) throw FormatError("dataset line 1: expected '# role: <ROLE>'");
  std::string role = line.substr(prefix.size());
  role.erase(0, role.find_first_not_of(" \t"));
  role.erase(role.find_last_not_of(" \t") + 1);
  try {
    data.role = parse_source(role);
  } catch (const ValidationError& e) {
    throw FormatError("dataset line 1: " + std::string(e.what()));
  }

  TaggedQuery cur;
  cur.source = data.role;
  std::size_t first_line = 0;
  auto flush = [&] {
    if (cur.tokens.empty()) return;
    if (lenient) cur.labels = repair_bio(std::move(cur.labels));
    try {
      validate(cur);
    } catch (const ValidationError& e) {
      throw FormatError("dataset query starting at line " + std::to_string(first_line) + ": " +
                        e.what());
    }
    data.items.push_back(std::move(cur));
    cur = TaggedQuery{};
    cur.source = data.role;
  };

  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      flush();
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw FormatError("dataset line " + std::to_string(line_no) + ": expected <token>\\t<label>");
    if (cur.tokens.empty()) first_line = line_no;
    cur.tokens.push_back(line.substr(0, tab));
    try {
      cur.labels.push_back(parse_label(line.substr(tab + 1)));
    } catch (const ValidationError& e) {
      throw FormatError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  flush();
  return data;
}

Dataset read_dataset(const std::filesystem::path& path, bool lenient) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset file " + path.string());
  return read_dataset(in, lenient);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "# role: " << to_string(data.role) << '\n';
  for (std::size_t q = 0; q < data.items.size(); ++q) {
    const auto& item = data.items[q];
    if (q) out << '\n';
    for (std::size_t i = 0; i < item.tokens.size(); ++i)
      out << item.tokens[i] << '\t' << to_string(item.labels[i]) << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write dataset file " + path.string());
  write_dataset(out, data);
  if (!out) throw FormatError("write failed for " + path.string());
}

std::set<std::string> read_entity_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open entity list " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    try {
      out.insert(join(normalize_query(line)));
    } catch (const EmptyQueryError&) {
    }
  }
  return out;
}

Catalog read_catalog(const std::filesystem::path& brands,
                     const std::filesystem::path& product_types) {
  return Catalog{read_entity_list(brands), read_entity_list(product_types)};
}

void write_entity_list(const std::filesystem::path& path, const std::set<std::string>& entries) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write entity list " + path.string());
  for (const auto& e : entries) out << e << '\n';
}

std::string catalog_fingerprint(const Catalog& catalog) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed("brands\n");
  for (const auto& b : catalog.brands) {
    feed(b);
    feed("\n");
  }
  feed("product_types\n");
  for (const auto& p : catalog.product_types) {
    feed(p);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qtag
