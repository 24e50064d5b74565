#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "surfscatter/error.hpp"
#include "surfscatter/parallel.hpp"
#include "surfscatter/types.hpp"

namespace surfscatter {

/// How raw sensor intensity maps to linear reflectance.
enum class IntensityMode {
  Identity,    ///< raw values are already linear
  DbToLinear,  ///< raw values are in dB: linear = 10^(raw/10)
};

inline std::string_view to_string(IntensityMode m) {
  return m == IntensityMode::Identity ? "identity" : "db";
}

inline IntensityMode intensity_mode_from_string(std::string_view s) {
  if (s == "identity") return IntensityMode::Identity;
  if (s == "db") return IntensityMode::DbToLinear;
  throw Error(ErrorCode::InvalidArgument, "unknown intensity_mode '" + std::string(s) + "' (expected identity|db)");
}

inline double linearize_intensity(double raw, IntensityMode mode) {
  if (!std::isfinite(raw)) {
    throw Error(ErrorCode::InvalidArgument, "intensity must be finite");
  }
  if (raw < 0.0) {
    throw Error(ErrorCode::NegativeIntensity, "raw intensity " + std::to_string(raw) + " < 0");
  }
  if (mode == IntensityMode::Identity) return raw;
  return std::pow(10.0, raw / 10.0);
}

/// Column names of the point CSV. Matching is case-insensitive and ignores
/// surrounding whitespace and quotes. An empty `ring` disables ring lookup;
/// a named ring column that is absent from the file is simply not read.
struct CsvSchema {
  std::string x = "x";
  std::string y = "y";
  std::string z = "z";
  std::string intensity = "intensity";
  std::string ring = "ring";
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.front())) || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) || s.back() == '"')) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

inline bool skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

/// Parses a point CSV (header row first; blank lines and lines starting with
/// '#' are ignored). Row numbers in errors are 1-based physical line numbers.
inline SurfaceScan parse_point_csv(std::istream& in, const CsvSchema& schema, IntensityMode mode) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!detail::skippable(line)) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw Error(ErrorCode::EmptyCloud, "no header row");

  const auto header = detail::split_csv_line(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const std::string want = detail::lower(detail::trim(name));
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (detail::lower(header[i]) == want) return i;
    }
    return std::nullopt;
  };
  auto required = [&](const std::string& name) {
    auto idx = column(name);
    if (!idx) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in header");
    return *idx;
  };
  const std::size_t cx = required(schema.x);
  const std::size_t cy = required(schema.y);
  const std::size_t cz = required(schema.z);
  const std::size_t ci = required(schema.intensity);
  const std::optional<std::size_t> cr = schema.ring.empty() ? std::nullopt : column(schema.ring);
  const std::size_t needed = std::max({cx, cy, cz, ci, cr.value_or(0)}) + 1;

  SurfaceScan scan;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::skippable(line)) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = "row " + std::to_string(line_no);
    if (fields.size() < needed) {
      throw Error(ErrorCode::MalformedRow, where + ": expected at least " + std::to_string(needed) + " fields, got " +
                                               std::to_string(fields.size()));
    }
    auto number = [&](std::size_t idx, const std::string& name) {
      auto v = detail::parse_double(fields[idx]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::MalformedRow, where + ": field '" + name + "' is not a finite number: '" +
                                                 std::string(fields[idx]) + "'");
      }
      return *v;
    };
    LidarPoint p;
    p.x = number(cx, schema.x);
    p.y = number(cy, schema.y);
    p.z = number(cz, schema.z);
    p.intensity_raw = number(ci, schema.intensity);
    if (p.intensity_raw < 0.0) {
      throw Error(ErrorCode::NegativeIntensity, where + ": intensity " + std::string(fields[ci]) + " < 0");
    }
    p.intensity_linear = linearize_intensity(p.intensity_raw, mode);
    if (cr && !fields[*cr].empty()) {
      const double r = number(*cr, schema.ring);
      if (r != std::floor(r) || r < 0.0 || r > 7.0) {
        throw Error(ErrorCode::MalformedRow, where + ": ring must be an integer in [0, 7], got " + std::string(fields[*cr]));
      }
      p.ring = static_cast<int>(r);
    }
    scan.points.push_back(p);
  }
  if (scan.points.empty()) throw Error(ErrorCode::EmptyCloud, "no data rows");
  return scan;
}

/// Writes raw intensities (and rings, when any point carries one) with
/// shortest round-trip formatting, so re-parsing reproduces the scan exactly.
inline void write_point_csv(std::ostream& out, const SurfaceScan& scan, const CsvSchema& schema = {}) {
  const bool with_ring =
      !schema.ring.empty() && std::any_of(scan.points.begin(), scan.points.end(), [](const LidarPoint& p) { return p.ring.has_value(); });
  out << schema.x << ',' << schema.y << ',' << schema.z << ',' << schema.intensity;
  if (with_ring) out << ',' << schema.ring;
  out << '\n';
  for (const auto& p : scan.points) {
    out << detail::format_double(p.x) << ',' << detail::format_double(p.y) << ',' << detail::format_double(p.z) << ','
        << detail::format_double(p.intensity_raw);
    if (with_ring) {
      out << ',';
      if (p.ring) out << *p.ring;
    }
    out << '\n';
  }
}

struct ManifestEntry {
  std::string material;
  std::filesystem::path path;
  SurfaceClass canonical_class = SurfaceClass::Unlabeled;
  IntensityMode intensity_mode = IntensityMode::Identity;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

/// Parses a manifest: a JSON array of objects with exactly the keys
/// material, path, class (semi|low|unlabeled) and intensity_mode
/// (identity|db; optional, default identity). Relative paths are resolved
/// against `base_dir`.
inline DatasetManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidManifest, "manifest must be a JSON array");
  static const std::set<std::string> allowed = {"material", "path", "class", "intensity_mode"};
  DatasetManifest manifest;
  std::set<std::string> names;
  std::set<std::filesystem::path> paths;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    const std::string where = "entry " + std::to_string(i);
    if (!e.is_object()) throw Error(ErrorCode::InvalidManifest, where + " is not an object");
    for (const auto& [key, _] : e.items()) {
      if (!allowed.count(key)) throw Error(ErrorCode::InvalidManifest, where + ": unknown field '" + key + "'");
    }
    for (const char* key : {"material", "path", "class"}) {
      if (!e.contains(key) || !e[key].is_string()) {
        throw Error(ErrorCode::InvalidManifest, where + ": missing string field '" + key + "'");
      }
    }
    ManifestEntry entry;
    entry.material = e["material"].get<std::string>();
    if (entry.material.empty()) throw Error(ErrorCode::InvalidManifest, where + ": empty material name");
    entry.path = e["path"].get<std::string>();
    if (entry.path.is_relative() && !base_dir.empty()) entry.path = base_dir / entry.path;
    entry.path = entry.path.lexically_normal();
    try {
      entry.canonical_class = surface_class_from_string(e["class"].get<std::string>());
      if (e.contains("intensity_mode")) {
        if (!e["intensity_mode"].is_string()) throw Error(ErrorCode::InvalidManifest, "intensity_mode must be a string");
        entry.intensity_mode = intensity_mode_from_string(e["intensity_mode"].get<std::string>());
      }
    } catch (const Error& err) {
      throw Error(ErrorCode::InvalidManifest, where + ": " + err.what());
    }
    if (!names.insert(entry.material).second) {
      throw Error(ErrorCode::DuplicateMaterial, "material '" + entry.material + "' listed more than once");
    }
    if (!paths.insert(entry.path).second) {
      throw Error(ErrorCode::InvalidManifest, "path '" + entry.path.string() + "' listed more than once");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

inline DatasetManifest read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot open manifest " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidManifest, file.string() + ": " + e.what());
  }
  return parse_manifest(j, file.parent_path());
}

inline SurfaceScan load_scan(const ManifestEntry& entry, const CsvSchema& schema) {
  std::ifstream in(entry.path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot open " + entry.path.string());
  SurfaceScan scan = parse_point_csv(in, schema, entry.intensity_mode);
  scan.material_name = entry.material;
  scan.canonical_class = entry.canonical_class;
  return scan;
}

/// Loads every manifest entry (files parsed concurrently). All per-file
/// failures are collected; the thrown error carries the first failure's code
/// and one line per failing file.
inline Dataset load_dataset(const DatasetManifest& manifest, const CsvSchema& schema = {}, std::size_t threads = 0) {
  std::set<std::string> names;
  for (const auto& e : manifest.entries) {
    if (!names.insert(e.material).second) {
      throw Error(ErrorCode::DuplicateMaterial, "material '" + e.material + "' listed more than once");
    }
  }

  const std::size_t n = manifest.entries.size();
  std::vector<SurfaceScan> scans(n);
  std::vector<std::optional<Error>> failures(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      scans[i] = load_scan(manifest.entries[i], schema);
    } catch (const Error& e) {
      failures[i] = e;
    }
  });

  std::optional<ErrorCode> first;
  std::string message;
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i]) continue;
    if (!first) first = failures[i]->code();
    message += "\n  " + manifest.entries[i].material + " (" + manifest.entries[i].path.string() + "): " + failures[i]->what();
  }
  if (first) throw Error(*first, "failed to load dataset:" + message);

  Dataset dataset;
  dataset.scans = std::move(scans);
  return dataset;
}

}  // namespace surfscatter
