#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "numerics.hpp"

namespace graphkan {

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[best]) best = k;
    return best;
}

/// Fraction of masked nodes whose argmax logit equals the label.
inline double accuracy(const matrix& logits, const std::vector<int>& labels, const std::vector<char>& mask) {
    if (labels.size() != logits.rows() || mask.size() != logits.rows())
        throw input_error("accuracy: labels/mask length does not match logits rows");
    std::size_t n = 0, hit = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        if (!mask[r]) continue;
        ++n;
        if (labels[r] >= 0 && argmax(logits.row(r)) == static_cast<std::size_t>(labels[r])) ++hit;
    }
    if (n == 0) throw input_error("accuracy: mask selects no nodes");
    return static_cast<double>(hit) / static_cast<double>(n);
}

struct silhouette_result {
    double score = 0.0;
    std::map<int, double> per_class;
    std::size_t nodes = 0;
    /// Nodes pinned to 0 because their class had a single member.
    std::size_t singletons = 0;
};

inline void to_json(nlohmann::json& j, const silhouette_result& s) {
    nlohmann::json pc = nlohmann::json::object();
    for (const auto& [c, v] : s.per_class) pc[std::to_string(c)] = v;
    j = {{"score", s.score}, {"per_class", pc}, {"nodes", s.nodes}, {"singletons", s.singletons}};
}

/// Mean silhouette (b - a) / max(a, b) over masked nodes, Euclidean distance.
/// a is the mean distance to the node's own class (self excluded), b the
/// smallest mean distance to another class. A node whose class has no other
/// member scores 0 and is counted in `singletons`; a = b = 0 scores 0.
inline silhouette_result silhouette(const matrix& features, const std::vector<int>& labels,
                                    const std::vector<char>& mask) {
    if (labels.size() != features.rows() || mask.size() != features.rows())
        throw input_error("silhouette: labels/mask length does not match feature rows");
    std::vector<std::size_t> nodes;
    std::map<int, std::size_t> class_index;
    for (std::size_t r = 0; r < features.rows(); ++r) {
        if (!mask[r]) continue;
        if (labels[r] < 0) throw input_error("silhouette: masked node " + std::to_string(r) + " has no label");
        nodes.push_back(r);
        class_index.emplace(labels[r], 0);
    }
    if (class_index.size() < 2) throw input_error("silhouette: need at least two classes among masked nodes");
    std::size_t ci = 0;
    for (auto& [label, idx] : class_index) idx = ci++;
    const std::size_t nc = class_index.size();
    std::vector<std::size_t> cls(nodes.size());
    std::vector<std::size_t> class_size(nc, 0);
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        cls[a] = class_index[labels[nodes[a]]];
        ++class_size[cls[a]];
    }

    silhouette_result res;
    res.nodes = nodes.size();
    std::vector<double> class_sum(nc, 0.0);
    std::vector<double> dist_sum(nc);
    double total = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        const auto fa = features.row(nodes[a]);
        for (std::size_t b = 0; b < nodes.size(); ++b) {
            if (a == b) continue;
            const auto fb = features.row(nodes[b]);
            double d2 = 0.0;
            for (std::size_t k = 0; k < fa.size(); ++k) d2 += (fa[k] - fb[k]) * (fa[k] - fb[k]);
            dist_sum[cls[b]] += std::sqrt(d2);
        }
        double s = 0.0;
        if (class_size[cls[a]] < 2) {
            ++res.singletons;
        } else {
            const double intra = dist_sum[cls[a]] / static_cast<double>(class_size[cls[a]] - 1);
            double inter = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < nc; ++c)
                if (c != cls[a]) inter = std::min(inter, dist_sum[c] / static_cast<double>(class_size[c]));
            const double denom = std::max(intra, inter);
            s = denom > 0.0 ? (inter - intra) / denom : 0.0;
        }
        class_sum[cls[a]] += s;
        total += s;
    }
    res.score = total / static_cast<double>(nodes.size());
    for (const auto& [label, idx] : class_index)
        res.per_class[label] = class_sum[idx] / static_cast<double>(class_size[idx]);
    return res;
}

/// Writes masked rows as CSV: node_id,label,f_0..f_{d-1}. Values use 17
/// significant digits so parsing recovers them exactly.
inline void export_features(const matrix& features, const std::vector<int>& labels,
                            const std::vector<char>& mask, const std::string& path) {
    if (labels.size() != features.rows() || mask.size() != features.rows())
        throw input_error("export_features: labels/mask length does not match feature rows");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "node_id,label";
    for (std::size_t k = 0; k < features.cols(); ++k) out << ",f_" << k;
    out << '\n';
    for (std::size_t r = 0; r < features.rows(); ++r) {
        if (!mask[r]) continue;
        out << r << ',' << labels[r];
        for (double v : features.row(r)) out << ',' << v;
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace graphkan
