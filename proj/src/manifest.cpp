#include "uwoc/manifest.hpp"

#include "uwoc/errors.hpp"
#include "uwoc/raster.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace uwoc {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
    T value{};
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) throw ParseError("invalid " + what + ": '" + s + "'");
    return value;
}

} // namespace

int LabelGrid::osnr_db(int index) {
    if (index < 0 || index >= osnr_classes) throw std::invalid_argument("OSNR class index out of range");
    return osnr_min_db + index;
}

int LabelGrid::phase_deg(int index) {
    if (index < 0 || index >= static_cast<int>(phase_values_deg.size()))
        throw std::invalid_argument("phase class index out of range");
    return phase_values_deg[static_cast<std::size_t>(index)];
}

int LabelGrid::osnr_index(double osnr) {
    const double idx = osnr - osnr_min_db;
    if (idx != std::round(idx) || idx < 0 || idx >= osnr_classes)
        throw std::invalid_argument("OSNR " + std::to_string(osnr) + " dB is not on the label grid");
    return static_cast<int>(idx);
}

int LabelGrid::phase_index(double phase) {
    for (std::size_t i = 0; i < phase_values_deg.size(); ++i)
        if (phase == phase_values_deg[i]) return static_cast<int>(i);
    throw std::invalid_argument("phase deviation " + std::to_string(phase) + " deg is not on the label grid");
}

int DatasetManifest::resolution() const {
    const auto it = config.find("resolution");
    if (it == config.end()) throw ParseError("manifest does not declare a resolution");
    return parse_number<int>(it->second, "resolution");
}

std::map<std::array<int, 3>, int> DatasetManifest::counts() const {
    std::map<std::array<int, 3>, int> tally;
    for (const auto& r : records)
        ++tally[{r.format, static_cast<int>(std::lround(r.osnr_db)), static_cast<int>(std::lround(r.phase_std_deg))}];
    return tally;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "# uwoc dataset manifest v1\n";
    for (const auto& [key, value] : manifest.config) out << "# " << key << '=' << value << '\n';
    out << manifest_header << '\n';
    for (const auto& r : manifest.records) {
        out << r.path << ',' << r.format << ',' << r.osnr_db << ',' << r.phase_std_deg << ',' << r.seed << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    DatasetManifest m;
    m.directory = path.parent_path();
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                const auto key_start = line.find_first_not_of("# ");
                m.config[line.substr(key_start, eq - key_start)] = line.substr(eq + 1);
            }
            continue;
        }
        if (!header_seen) {
            if (line != manifest_header) throw ParseError("unexpected manifest header: " + line);
            header_seen = true;
            continue;
        }
        const auto f = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (f.size() != 5) throw ParseError("expected 5 fields at " + where);
        ManifestRecord r;
        r.path = f[0];
        r.format = parse_number<int>(f[1], "format at " + where);
        r.osnr_db = parse_number<double>(f[2], "osnr_db at " + where);
        r.phase_std_deg = parse_number<double>(f[3], "phase_std_deg at " + where);
        r.seed = parse_number<std::uint64_t>(f[4], "seed at " + where);
        if (r.path.empty()) throw ParseError("empty image path at " + where);
        if (r.format < 0 || r.format > 3) throw ParseError("format label out of range at " + where);
        try {
            LabelGrid::osnr_index(r.osnr_db);
            LabelGrid::phase_index(r.phase_std_deg);
        } catch (const std::invalid_argument& e) {
            throw ParseError(std::string(e.what()) + " at " + where);
        }
        m.records.push_back(std::move(r));
    }
    if (!header_seen) throw ParseError("manifest has no header: " + path.string());
    return m;
}

void validate_images(const DatasetManifest& manifest) {
    const int res = manifest.resolution();
    for (const auto& r : manifest.records) {
        const auto img = read_pgm(manifest.image_path(r));
        if (img.resolution != res)
            throw ParseError("image " + r.path + " is " + std::to_string(img.resolution) + " px, manifest declares " +
                             std::to_string(res));
    }
}

DatasetManifest subset_manifest(const DatasetManifest& source, const std::vector<std::size_t>& indices,
                                const std::filesystem::path& directory) {
    DatasetManifest m;
    m.config = source.config;
    m.directory = directory;
    const auto base = std::filesystem::absolute(directory).lexically_normal();
    for (auto i : indices) {
        ManifestRecord r = source.records.at(i);
        const auto img = std::filesystem::absolute(source.image_path(r)).lexically_normal();
        r.path = img.lexically_relative(base).generic_string();
        m.records.push_back(std::move(r));
    }
    return m;
}

} // namespace uwoc
