#include "masklab/drift.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "io_util.hpp"
#include "masklab/error.hpp"

namespace masklab {

namespace {

void check_uniform(const EmbeddingSet& set, const char* what) {
    if (set.vectors.empty()) {
        throw Error(std::string(what) + ": empty embedding set");
    }
    const std::size_t dim = set.vectors.front().size();
    for (const auto& v : set.vectors) {
        if (v.size() != dim) {
            throw Error(std::string(what) + ": embedding dimensions differ");
        }
    }
}

}  // namespace

Vec centroid(const EmbeddingSet& set) {
    check_uniform(set, "centroid");
    const auto k = static_cast<double>(set.vectors.size());
    Vec mu(set.vectors.front().size(), 0.0);
    for (const auto& v : set.vectors) {
        for (std::size_t j = 0; j < mu.size(); ++j) {
            mu[j] += v[j];
        }
    }
    for (double& m : mu) {
        m /= k;
    }
    return mu;
}

double cos_sim(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw Error("cos_sim: dimension mismatch");
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw Error("undefined cosine");
    }
    return dot(a, b) / (na * nb);
}

double mean_feature_std(const EmbeddingSet& set) {
    check_uniform(set, "mean_feature_std");
    if (set.vectors.size() < 2) {
        throw Error("mean_feature_std: needs at least 2 vectors");
    }
    const Vec mu = centroid(set);
    const auto k = static_cast<double>(set.vectors.size());
    double total = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
        double var = 0.0;
        for (const auto& v : set.vectors) {
            const double d = v[j] - mu[j];
            var += d * d;
        }
        total += std::sqrt(var / k);
    }
    return total / static_cast<double>(mu.size());
}

std::vector<double> DriftCurve::delta_mu() const {
    std::vector<double> out(centroid_cos.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 1.0 - centroid_cos[i];
    }
    return out;
}

std::vector<double> DriftCurve::delta_sigma() const {
    std::vector<double> out(mean_feature_std.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = mean_feature_std[i] - mean_feature_std.front();
    }
    return out;
}

namespace {

void validate_fractions(const std::vector<double>& fractions) {
    if (fractions.empty() || fractions.front() != 0.0) {
        throw Error("drift fractions must start at 0");
    }
    for (std::size_t i = 1; i < fractions.size(); ++i) {
        if (!(fractions[i] > fractions[i - 1])) {
            throw Error("drift fractions must increase strictly");
        }
        if (fractions[i] > 1.0) {
            throw Error("drift fractions must not exceed 1");
        }
    }
}

}  // namespace

std::vector<EmbeddingSet> masked_embedding_sets(const ClassifierModel& model,
                                                const std::vector<TokenSequence>& samples,
                                                AttributionMethod attr_method,
                                                const std::vector<double>& fractions,
                                                int ig_steps, const std::string& source) {
    validate_fractions(fractions);
    if (samples.empty()) {
        throw Error("masked_embedding_sets: no samples");
    }
    if (!model.capabilities().embeddable) {
        throw Error("masked_embedding_sets: model is not embeddable");
    }

    std::vector<std::vector<int>> orders;
    orders.reserve(samples.size());
    for (const auto& sample : samples) {
        const int y0 = predicted_class(model, sample);
        const AttributionVector attr = attribute(model, sample, y0, attr_method, ig_steps);
        orders.push_back(rank_tokens(attr, sample.maskable));
    }

    std::vector<EmbeddingSet> sets;
    sets.reserve(fractions.size());
    for (const double q : fractions) {
        EmbeddingSet set;
        set.source = source;
        set.mask_fraction = q;
        set.vectors.reserve(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& order = orders[i];
            const auto n_mask = static_cast<std::size_t>(
                std::ceil(q * static_cast<double>(order.size())));
            TokenSequence masked = samples[i];
            for (std::size_t r = 0; r < n_mask && r < order.size(); ++r) {
                const auto pos = static_cast<std::size_t>(order[r]);
                masked.ids[pos] = Vocab::kUnkId;
                masked.raw[pos] = Vocab::kUnkToken;
            }
            set.vectors.push_back(model.embed_sample(masked));
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

DriftCurve drift_curve_from_sets(const std::vector<EmbeddingSet>& sets) {
    if (sets.empty()) {
        throw Error("drift_curve: no embedding sets");
    }
    if (sets.front().mask_fraction != 0.0) {
        throw Error("drift_curve: first set must be the unmasked one");
    }
    const Vec clean_centroid = centroid(sets.front());

    DriftCurve curve;
    for (const auto& set : sets) {
        check_uniform(set, "drift_curve");
        curve.mask_fractions.push_back(set.mask_fraction);
        double mean_cos = 0.0;
        for (const auto& v : set.vectors) {
            mean_cos += cos_sim(v, clean_centroid);
        }
        curve.mean_cos_to_clean_centroid.push_back(mean_cos /
                                                   static_cast<double>(set.vectors.size()));
        curve.centroid_cos.push_back(cos_sim(centroid(set), clean_centroid));
        curve.mean_feature_std.push_back(mean_feature_std(set));
    }
    return curve;
}

DriftCurve drift_curve(const ClassifierModel& model, const std::vector<TokenSequence>& samples,
                       AttributionMethod attr_method, const std::vector<double>& fractions,
                       int ig_steps) {
    return drift_curve_from_sets(
        masked_embedding_sets(model, samples, attr_method, fractions, ig_steps));
}

std::vector<ProjectedPoint> pca_projection(const std::vector<EmbeddingSet>& sets) {
    std::size_t total = 0;
    std::size_t dim = 0;
    for (const auto& set : sets) {
        check_uniform(set, "pca_projection");
        if (dim == 0) {
            dim = set.vectors.front().size();
        } else if (set.vectors.front().size() != dim) {
            throw Error("pca_projection: sets have different embedding dimensions");
        }
        total += set.vectors.size();
    }
    if (total < 3) {
        throw Error("pca_projection: needs at least 3 vectors");
    }
    if (dim < 2) {
        throw Error("pca_projection: needs embedding dimension >= 2");
    }

    Vec mean(dim, 0.0);
    for (const auto& set : sets) {
        for (const auto& v : set.vectors) {
            for (std::size_t j = 0; j < dim; ++j) {
                mean[j] += v[j];
            }
        }
    }
    for (double& m : mean) {
        m /= static_cast<double>(total);
    }

    Matrix cov(dim, dim);
    for (const auto& set : sets) {
        for (const auto& v : set.vectors) {
            for (std::size_t a = 0; a < dim; ++a) {
                const double da = v[a] - mean[a];
                for (std::size_t b = a; b < dim; ++b) {
                    cov(a, b) += da * (v[b] - mean[b]);
                }
            }
        }
    }
    for (std::size_t a = 0; a < dim; ++a) {
        for (std::size_t b = a; b < dim; ++b) {
            cov(a, b) /= static_cast<double>(total);
            cov(b, a) = cov(a, b);
        }
    }

    const EigenDecomposition eig = jacobi_eigen(cov);
    const double scale = std::max(std::abs(eig.eigenvalues.front()), 1.0);
    int rank = 0;
    for (const double v : eig.eigenvalues) {
        if (std::abs(v) > scale * 1e-12) {
            ++rank;
        }
    }
    if (rank < 2) {
        throw Error("pca_projection: covariance rank " + std::to_string(rank) +
                    ", need at least 2");
    }

    // Two leading components, sign fixed on the largest-magnitude loading.
    Matrix components(2, dim);
    for (std::size_t c = 0; c < 2; ++c) {
        std::size_t peak = 0;
        for (std::size_t j = 1; j < dim; ++j) {
            if (std::abs(eig.eigenvectors(j, c)) > std::abs(eig.eigenvectors(peak, c))) {
                peak = j;
            }
        }
        const double sign = eig.eigenvectors(peak, c) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < dim; ++j) {
            components(c, j) = sign * eig.eigenvectors(j, c);
        }
    }

    std::vector<ProjectedPoint> points;
    points.reserve(total);
    for (const auto& set : sets) {
        for (std::size_t i = 0; i < set.vectors.size(); ++i) {
            ProjectedPoint p;
            p.set_name = set.source;
            p.mask_fraction = set.mask_fraction;
            p.sample_id = static_cast<int>(i);
            for (std::size_t j = 0; j < dim; ++j) {
                const double centered = set.vectors[i][j] - mean[j];
                p.pc1 += components(0, j) * centered;
                p.pc2 += components(1, j) * centered;
            }
            points.push_back(std::move(p));
        }
    }
    return points;
}

void write_drift_csv(const std::string& path, const DriftCurve& curve) {
    auto out = detail::open_out(path, "write_drift_csv");
    out << "fraction,mean_cos,centroid_cos,mean_feature_std,delta_mu,delta_sigma\n";
    const std::vector<double> dmu = curve.delta_mu();
    const std::vector<double> dsigma = curve.delta_sigma();
    for (std::size_t i = 0; i < curve.mask_fractions.size(); ++i) {
        out << detail::fmt_double(curve.mask_fractions[i]) << ','
            << detail::fmt_double(curve.mean_cos_to_clean_centroid[i]) << ','
            << detail::fmt_double(curve.centroid_cos[i]) << ','
            << detail::fmt_double(curve.mean_feature_std[i]) << ','
            << detail::fmt_double(dmu[i]) << ',' << detail::fmt_double(dsigma[i]) << '\n';
    }
}

DriftCurve read_drift_csv(const std::string& path) {
    auto in = detail::open_in(path, "read_drift_csv");
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("read_drift_csv: empty file");
    }
    DriftCurve curve;
    int line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(row, cell, ',')) {
            cells.push_back(std::stod(cell));
        }
        if (cells.size() != 6) {
            throw Error("read_drift_csv: line " + std::to_string(line_number) +
                        " has " + std::to_string(cells.size()) + " columns, expected 6");
        }
        curve.mask_fractions.push_back(cells[0]);
        curve.mean_cos_to_clean_centroid.push_back(cells[1]);
        curve.centroid_cos.push_back(cells[2]);
        curve.mean_feature_std.push_back(cells[3]);
    }
    if (curve.mask_fractions.empty()) {
        throw Error("read_drift_csv: no rows");
    }
    return curve;
}

void write_embeddings_csv(const std::string& path, const std::vector<EmbeddingSet>& sets) {
    auto out = detail::open_out(path, "write_embeddings_csv");
    out << "set_name,mask_fraction,sample_id,dim,value\n";
    for (const auto& set : sets) {
        for (std::size_t i = 0; i < set.vectors.size(); ++i) {
            for (std::size_t j = 0; j < set.vectors[i].size(); ++j) {
                out << set.source << ',' << detail::fmt_double(set.mask_fraction) << ',' << i
                    << ',' << j << ',' << detail::fmt_double(set.vectors[i][j]) << '\n';
            }
        }
    }
}

std::vector<EmbeddingSet> read_embeddings_csv(const std::string& path) {
    auto in = detail::open_in(path, "read_embeddings_csv");
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("read_embeddings_csv: empty file");
    }
    std::vector<EmbeddingSet> sets;
    int line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string name, fraction_s, id_s, dim_s, value_s;
        if (!std::getline(row, name, ',') || !std::getline(row, fraction_s, ',') ||
            !std::getline(row, id_s, ',') || !std::getline(row, dim_s, ',') ||
            !std::getline(row, value_s)) {
            throw Error("read_embeddings_csv: line " + std::to_string(line_number) +
                        " malformed");
        }
        const double fraction = std::stod(fraction_s);
        const auto id = static_cast<std::size_t>(std::stoul(id_s));
        const auto dim = static_cast<std::size_t>(std::stoul(dim_s));
        const double value = std::stod(value_s);

        if (sets.empty() || sets.back().source != name ||
            sets.back().mask_fraction != fraction) {
            EmbeddingSet set;
            set.source = name;
            set.mask_fraction = fraction;
            sets.push_back(std::move(set));
        }
        auto& vectors = sets.back().vectors;
        if (id == vectors.size() && dim == 0) {
            vectors.emplace_back();
        }
        if (id != vectors.size() - 1 || dim != vectors.back().size()) {
            throw Error("read_embeddings_csv: line " + std::to_string(line_number) +
                        " out of order");
        }
        vectors.back().push_back(value);
    }
    if (sets.empty()) {
        throw Error("read_embeddings_csv: no rows");
    }
    return sets;
}

void write_projection_csv(const std::string& path, const std::vector<ProjectedPoint>& points) {
    auto out = detail::open_out(path, "write_projection_csv");
    out << "set_name,mask_fraction,sample_id,pc1,pc2\n";
    for (const auto& p : points) {
        out << p.set_name << ',' << detail::fmt_double(p.mask_fraction) << ',' << p.sample_id
            << ',' << detail::fmt_double(p.pc1) << ',' << detail::fmt_double(p.pc2) << '\n';
    }
}

}  // namespace masklab
