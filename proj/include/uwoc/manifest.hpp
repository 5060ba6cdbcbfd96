#ifndef UWOC_MANIFEST_HPP
#define UWOC_MANIFEST_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace uwoc {

/// The labeled noise grid: OSNR 15..30 dB in 1 dB steps, phase deviation {0, 10, 20, 30, 45} deg.
struct LabelGrid {
    static constexpr int osnr_min_db = 15;
    static constexpr int osnr_classes = 16;
    static constexpr std::array<int, 5> phase_values_deg{0, 10, 20, 30, 45};

    static int osnr_db(int index);
    static int phase_deg(int index);
    /// Class index of an exact grid value; throws std::invalid_argument otherwise.
    static int osnr_index(double osnr_db);
    static int phase_index(double phase_deg);
};

struct ManifestRecord {
    std::string path;        // relative to the manifest's directory
    int format = 0;          // 0..3 for 8/16/32/64-QAM
    double osnr_db = 0.0;
    double phase_std_deg = 0.0;
    std::uint64_t seed = 0;
};

/// Dataset index: "# key=value" config lines followed by a CSV table of records.
struct DatasetManifest {
    std::map<std::string, std::string> config;
    std::vector<ManifestRecord> records;
    std::filesystem::path directory;

    int resolution() const;
    std::filesystem::path image_path(const ManifestRecord& r) const { return directory / r.path; }
    /// Tally keyed by (format, osnr_db, phase_deg).
    std::map<std::array<int, 3>, int> counts() const;
};

inline constexpr const char* manifest_header = "path,format,osnr_db,phase_std_deg,seed";

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Parses and validates labels; throws ParseError on malformed or out-of-range records.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Every referenced image exists and parses as PGM at the declared resolution.
void validate_images(const DatasetManifest& manifest);

/// Copy of `source` restricted to `indices`, with paths rebased onto `directory`.
DatasetManifest subset_manifest(const DatasetManifest& source, const std::vector<std::size_t>& indices,
                                const std::filesystem::path& directory);

} // namespace uwoc

#endif
