#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fdf/mlkit.hpp"

namespace fdf {

inline constexpr int kArtifactVersion = 1;

namespace codes {
inline constexpr std::string_view kIo = "E-IO";
inline constexpr std::string_view kCsv = "E-CSV";
inline constexpr std::string_view kVersionMismatch = "E-VERSION";
inline constexpr std::string_view kCorrupt = "E-CORRUPT";
inline constexpr std::string_view kManifest = "E-MANIFEST";
}  // namespace codes

/// Whole-file write through a temporary sibling and rename.
void atomic_write(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

// --- batches ------------------------------------------------------------------

std::string format_csv(const DataBatch& batch);
/// `origin` only decorates error messages.
DataBatch parse_csv(std::string_view text, std::string_view origin = "<csv>");

DataBatch load_batch(const std::filesystem::path& path);
void save_batch(const DataBatch& batch, const std::filesystem::path& path);

// --- function artifacts -------------------------------------------------------

std::string serialize_function(const LearnedFunction& f);
FunctionPtr deserialize_function(std::string_view text, std::string_view origin = "<fdfn>");

void save_function(const LearnedFunction& f, const std::filesystem::path& path);
FunctionPtr load_function(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

// --- data manifest ------------------------------------------------------------

struct ManifestEntry {
  enum class Kind { Source, Sink };
  Kind kind = Kind::Source;
  std::string name;
  std::filesystem::path path;  // resolved against the manifest's directory
  int line = 0;
};

struct DataManifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry* source(std::string_view name) const;
  const ManifestEntry* sink(std::string_view name) const;
};

DataManifest parse_data_manifest(std::string_view text, const std::filesystem::path& base_dir,
                                 std::string_view origin = "<manifest>");
DataManifest load_data_manifest(const std::filesystem::path& path);

}  // namespace fdf
