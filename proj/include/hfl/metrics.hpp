#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace hfl {

// Mann-Whitney AUC: probability a random positive outscores a random
// negative, ties counted as 0.5. Computed via midranks.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
    const int n = static_cast<int>(scores.size());
    long np = std::count(labels.begin(), labels.end(), 1);
    long nn = n - np;
    if (np == 0 || nn == 0) throw std::invalid_argument("auc: both classes required");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = (i + j + 1) / 2.0;  // 1-based average rank of the tie group
        for (int k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j;
    }
    return (rank_sum_pos - np * (np + 1) / 2.0) / (static_cast<double>(np) * nn);
}

// Attack advantage in percent: 2 * (accuracy% - 50).
inline double advantage(const std::vector<int>& decisions, const std::vector<int>& labels) {
    if (decisions.size() != labels.size()) throw std::invalid_argument("advantage: size mismatch");
    if (decisions.empty()) return 0.0;
    long correct = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i)
        if (decisions[i] == labels[i]) ++correct;
    const double acc_pct = 100.0 * correct / decisions.size();
    return 2.0 * (acc_pct - 50.0);
}

// Max TPR over ROC operating points with FPR <= fpr_target (decision rule
// score >= threshold, step-function convention).
inline double tpr_at_fpr(const std::vector<double>& scores, const std::vector<int>& labels,
                         double fpr_target) {
    if (scores.size() != labels.size()) throw std::invalid_argument("tpr_at_fpr: size mismatch");
    if (fpr_target <= 0 || fpr_target >= 1) throw std::invalid_argument("tpr_at_fpr: target must be in (0,1)");
    const int n = static_cast<int>(scores.size());
    long np = std::count(labels.begin(), labels.end(), 1);
    long nn = n - np;
    if (np == 0 || nn == 0) throw std::invalid_argument("tpr_at_fpr: both classes required");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
    long tp = 0, fp = 0;
    double best = 0;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        for (int k = i; k < j; ++k)
            (labels[order[k]] == 1 ? tp : fp) += 1;
        const double fpr = static_cast<double>(fp) / nn;
        if (fpr <= fpr_target) best = std::max(best, static_cast<double>(tp) / np);
        i = j;
    }
    return best;
}

// Pearson r between log10(dataset size) and attack advantage, excluding
// clients below min_size.
inline double pearson_log_corr(const std::vector<double>& sizes, const std::vector<double>& advantages,
                               double min_size = 400.0) {
    if (sizes.size() != advantages.size()) throw std::invalid_argument("pearson: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < sizes.size(); ++i)
        if (sizes[i] >= min_size) {
            xs.push_back(std::log10(sizes[i]));
            ys.push_back(advantages[i]);
        }
    if (xs.size() < 3) throw std::invalid_argument("pearson: fewer than 3 clients above min_size");
    const auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    };
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0 || syy == 0) throw std::invalid_argument("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace hfl
