#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "qtag/core.hpp"

namespace qtag {

class FormatError : public Error {
 public:
  using Error::Error;
};

// Dataset text format: "# role: <ROLE>" on line 1, then one "<token>\t<label>"
// per line with a blank line between queries.
//
// With `lenient`, orphan I- tags are promoted to B- on ingestion; otherwise
// an invalid sequence is a FormatError citing the line number.
Dataset read_dataset(std::istream& in, bool lenient = false);
Dataset read_dataset(const std::filesystem::path& path, bool lenient = false);
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

// One entity per line; lines are normalized like queries, blank lines skipped.
std::set<std::string> read_entity_list(const std::filesystem::path& path);
Catalog read_catalog(const std::filesystem::path& brands, const std::filesystem::path& product_types);
void write_entity_list(const std::filesystem::path& path, const std::set<std::string>& entries);

// FNV-1a 64 over the canonical (sorted) catalog content, as 16 hex digits.
std::string catalog_fingerprint(const Catalog& catalog);

}  // namespace qtag
