#ifndef UWOC_MNSM_HPP
#define UWOC_MNSM_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace uwoc::mnsm {

using Point = std::array<double, 2>;

/// Linear normalization of the noise plane: [15, 30] dB and [0, 45] deg onto [0, 1].
struct NoiseAxes {
    double osnr_min = 15.0;
    double osnr_max = 30.0;
    double phase_min = 0.0;
    double phase_max = 45.0;

    Point normalize(double osnr_db, double phase_deg) const;
    /// Inverse of normalize: (osnr_db, phase_deg).
    Point raw(const Point& normalized) const;
};

struct NoisePoint {
    double osnr_db = 0.0;
    double phase_std_deg = 0.0;
};

/// Index of the nearest center; ties go to the lowest index.
std::size_t assign(const Point& point, std::span<const Point> centers);

/// Cluster means; a cluster with no members keeps its previous center.
std::vector<Point> update_centers(std::span<const Point> points, std::span<const std::size_t> assignments,
                                  std::span<const Point> previous);

double sum_squared_error(std::span<const Point> points, std::span<const Point> centers,
                         std::span<const std::size_t> assignments);

struct KMeansOptions {
    std::size_t k = 8;
    std::uint64_t seed = 1;
    double tolerance = 1e-6;
    int max_iterations = 300;
    int restarts = 10;
};

/// Quality-ordered k-means model. Level 0 has the highest
/// (normalized OSNR - normalized phase deviation) score.
struct ClusterModel {
    std::size_t k = 0;
    NoiseAxes axes;
    std::vector<Point> centers;                 // normalized, index == level
    std::vector<std::size_t> assignments;       // level of each fitted point
    std::vector<std::size_t> population;
    double sse = 0.0;
    std::vector<double> sse_history;            // best restart, one entry per iteration
    int iterations = 0;

    bool fitted() const noexcept { return !centers.empty(); }
};

/// One Lloyd run from a seeded random initialization (k distinct data points).
/// Throws std::logic_error if the SSE ever increases.
ClusterModel lloyd(std::span<const Point> points, std::size_t k, std::uint64_t seed, double tolerance,
                   int max_iterations);

/// Best of `restarts` Lloyd runs, relabelled by quality.
ClusterModel kmeans_fit(std::span<const Point> points, const KMeansOptions& options = {});
ClusterModel kmeans_fit(std::span<const NoisePoint> points, const KMeansOptions& options, const NoiseAxes& axes = {});

struct QualityLevel {
    std::size_t level = 0;
    double distance = 0.0;
};

/// Throws uwoc::StateError on an unfitted model.
QualityLevel classify_quality(double osnr_db, double phase_std_deg, const ClusterModel& model);

/// Reorders centers (and remaps assignments) so level 0 is the best quality.
void order_by_quality(ClusterModel& model);

// Report: header comments, then
//   center <level> <osnr_db> <phase_deg> <population>
//   point <label> <level>
void write_report(std::ostream& out, const ClusterModel& model, std::span<const std::string> point_labels,
                  const std::string& comment = {});
/// Reads the center lines of a report back into a model usable by classify_quality.
ClusterModel read_report(std::istream& in);

} // namespace uwoc::mnsm

#endif
