#include "uwoc/mnsm.hpp"

#include "uwoc/errors.hpp"
#include "uwoc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace uwoc::mnsm {

namespace {

double dist2(const Point& a, const Point& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

double quality_score(const Point& p) {
    return p[0] - p[1];
}

} // namespace

Point NoiseAxes::normalize(double osnr_db, double phase_deg) const {
    return {(osnr_db - osnr_min) / (osnr_max - osnr_min), (phase_deg - phase_min) / (phase_max - phase_min)};
}

Point NoiseAxes::raw(const Point& n) const {
    return {osnr_min + n[0] * (osnr_max - osnr_min), phase_min + n[1] * (phase_max - phase_min)};
}

std::size_t assign(const Point& point, std::span<const Point> centers) {
    if (centers.empty()) throw std::invalid_argument("assign: no centers");
    std::size_t best = 0;
    double best_d = dist2(point, centers[0]);
    for (std::size_t j = 1; j < centers.size(); ++j) {
        const double d = dist2(point, centers[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

std::vector<Point> update_centers(std::span<const Point> points, std::span<const std::size_t> assignments,
                                  std::span<const Point> previous) {
    if (points.size() != assignments.size()) throw std::invalid_argument("update_centers: size mismatch");
    const std::size_t k = previous.size();
    std::vector<Point> sums(k, Point{0.0, 0.0});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t c = assignments[i];
        if (c >= k) throw std::invalid_argument("update_centers: assignment out of range");
        sums[c][0] += points[i][0];
        sums[c][1] += points[i][1];
        ++counts[c];
    }
    std::vector<Point> centers(previous.begin(), previous.end());
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        const double n = static_cast<double>(counts[c]);
        centers[c] = {sums[c][0] / n, sums[c][1] / n};
    }
    return centers;
}

double sum_squared_error(std::span<const Point> points, std::span<const Point> centers,
                         std::span<const std::size_t> assignments) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += dist2(points[i], centers[assignments[i]]);
    return s;
}

ClusterModel lloyd(std::span<const Point> points, std::size_t k, std::uint64_t seed, double tolerance,
                   int max_iterations) {
    if (k == 0) throw std::invalid_argument("kmeans: k must be positive");
    if (points.size() < k) throw std::invalid_argument("kmeans: fewer points than clusters");

    // k distinct indices, uniformly at random (partial Fisher-Yates)
    Rng rng(seed);
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    ClusterModel m;
    m.k = k;
    for (std::size_t j = 0; j < k; ++j) {
        std::swap(idx[j], idx[j + rng.below(idx.size() - j)]);
        m.centers.push_back(points[idx[j]]);
    }

    m.assignments.assign(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) m.assignments[i] = assign(points[i], m.centers);
    m.sse = sum_squared_error(points, m.centers, m.assignments);
    m.sse_history.push_back(m.sse);

    for (m.iterations = 1; m.iterations <= max_iterations; ++m.iterations) {
        auto next = update_centers(points, m.assignments, m.centers);
        double shift = 0.0;
        for (std::size_t j = 0; j < k; ++j) shift = std::max(shift, std::sqrt(dist2(next[j], m.centers[j])));
        m.centers = std::move(next);
        for (std::size_t i = 0; i < points.size(); ++i) m.assignments[i] = assign(points[i], m.centers);
        const double sse = sum_squared_error(points, m.centers, m.assignments);
        if (sse > m.sse * (1.0 + 1e-12) + 1e-15)
            throw std::logic_error("kmeans: SSE increased during Lloyd iteration");
        m.sse = sse;
        m.sse_history.push_back(sse);
        if (shift < tolerance) break;
    }
    m.iterations = std::min(m.iterations, max_iterations);
    m.population.assign(k, 0);
    for (auto a : m.assignments) ++m.population[a];
    return m;
}

void order_by_quality(ClusterModel& model) {
    const std::size_t k = model.centers.size();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return quality_score(model.centers[a]) > quality_score(model.centers[b]);
    });
    std::vector<std::size_t> level_of(k);
    std::vector<Point> centers(k);
    std::vector<std::size_t> population(k, 0);
    for (std::size_t level = 0; level < k; ++level) {
        level_of[order[level]] = level;
        centers[level] = model.centers[order[level]];
        if (!model.population.empty()) population[level] = model.population[order[level]];
    }
    for (auto& a : model.assignments) a = level_of[a];
    model.centers = std::move(centers);
    model.population = std::move(population);
}

ClusterModel kmeans_fit(std::span<const Point> points, const KMeansOptions& options) {
    if (options.restarts <= 0) throw std::invalid_argument("kmeans: restarts must be positive");
    ClusterModel best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.restarts; ++r) {
        auto m = lloyd(points, options.k, hash_seed({options.seed, static_cast<std::uint64_t>(r)}), options.tolerance,
                       options.max_iterations);
        if (m.sse < best_sse) {
            best_sse = m.sse;
            best = std::move(m);
        }
    }
    order_by_quality(best);
    return best;
}

ClusterModel kmeans_fit(std::span<const NoisePoint> points, const KMeansOptions& options, const NoiseAxes& axes) {
    std::vector<Point> normalized;
    normalized.reserve(points.size());
    for (const auto& p : points) normalized.push_back(axes.normalize(p.osnr_db, p.phase_std_deg));
    auto model = kmeans_fit(normalized, options);
    model.axes = axes;
    return model;
}

QualityLevel classify_quality(double osnr_db, double phase_std_deg, const ClusterModel& model) {
    if (!model.fitted()) throw StateError("classify_quality: model is not fitted");
    const Point p = model.axes.normalize(osnr_db, phase_std_deg);
    const std::size_t level = assign(p, model.centers);
    return {level, std::sqrt(dist2(p, model.centers[level]))};
}

void write_report(std::ostream& out, const ClusterModel& model, std::span<const std::string> point_labels,
                  const std::string& comment) {
    out << "# mnsm cluster report\n";
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "# k " << model.k << " sse " << std::setprecision(10) << model.sse << " iterations " << model.iterations
        << '\n';
    out << "# axes osnr_db " << model.axes.osnr_min << ' ' << model.axes.osnr_max << " phase_deg "
        << model.axes.phase_min << ' ' << model.axes.phase_max << '\n';
    out << "# center <level> <osnr_db> <phase_deg> <population>\n";
    out << std::fixed << std::setprecision(6);
    for (std::size_t level = 0; level < model.centers.size(); ++level) {
        const auto raw = model.axes.raw(model.centers[level]);
        const std::size_t pop = level < model.population.size() ? model.population[level] : 0;
        out << "center " << level << ' ' << raw[0] << ' ' << raw[1] << ' ' << pop << '\n';
    }
    out << "# point <label> <level>\n";
    for (std::size_t i = 0; i < point_labels.size() && i < model.assignments.size(); ++i)
        out << "point " << point_labels[i] << ' ' << model.assignments[i] << '\n';
    out.unsetf(std::ios::floatfield);
}

ClusterModel read_report(std::istream& in) {
    ClusterModel m;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "#") {
            std::string key;
            ls >> key;
            if (key == "axes") {
                std::string name;
                ls >> name >> m.axes.osnr_min >> m.axes.osnr_max >> name >> m.axes.phase_min >> m.axes.phase_max;
                if (!ls) throw ParseError("malformed axes line in cluster report");
            }
            continue;
        }
        if (tag != "center") continue;
        std::size_t level = 0, pop = 0;
        double osnr = 0.0, phase = 0.0;
        if (!(ls >> level >> osnr >> phase >> pop)) throw ParseError("malformed center line: " + line);
        if (level != m.centers.size()) throw ParseError("center lines must be listed in level order");
        m.centers.push_back(m.axes.normalize(osnr, phase));
        m.population.push_back(pop);
    }
    if (m.centers.empty()) throw ParseError("cluster report has no center lines");
    m.k = m.centers.size();
    return m;
}

} // namespace uwoc::mnsm
