#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace claimnet {

/// Parsed CSV: rows of cells. Handles quoted fields (embedded commas, quotes,
/// newlines) and CRLF line endings. Lines starting with '#' are skipped.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Quotes cells only when needed.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::vector<std::string>& comment_lines = {});

std::string csv_escape(const std::string& cell);

/// Shortest representation that round-trips a double exactly.
std::string format_double(double x);

/// Integer-rounded with thousands separators: 60973.4 -> "60,973".
std::string format_thousands(double x);

/// Plain key=value config file; '#' comments and blank lines ignored.
using KvConfig = std::map<std::string, std::string>;
KvConfig read_kv_file(const std::string& path);
KvConfig parse_kv(const std::string& text);

double kv_double(const KvConfig& kv, const std::string& key, double fallback);
int kv_int(const KvConfig& kv, const std::string& key, int fallback);
std::string kv_string(const KvConfig& kv, const std::string& key, const std::string& fallback);

}  // namespace claimnet
