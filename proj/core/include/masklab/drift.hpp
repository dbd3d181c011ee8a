#pragma once

#include <string>
#include <vector>

#include "masklab/attribution.hpp"
#include "masklab/corpus.hpp"
#include "masklab/linalg.hpp"
#include "masklab/model.hpp"

namespace masklab {

/// Sample embeddings of one dataset at one masking level.
struct EmbeddingSet {
    std::vector<Vec> vectors;
    std::string source;
    double mask_fraction = 0.0;
};

/// Component-wise mean of the set's vectors.
Vec centroid(const EmbeddingSet& set);

/// Cosine similarity; errors on a zero vector.
double cos_sim(const Vec& a, const Vec& b);

/// Population (1/k) standard deviation per dimension, averaged over
/// dimensions. Needs at least two vectors.
double mean_feature_std(const EmbeddingSet& set);

/// How masking moves embeddings away from the clean distribution, per
/// masked-token fraction. Index 0 is always the clean set.
struct DriftCurve {
    std::vector<double> mask_fractions;
    std::vector<double> mean_cos_to_clean_centroid;
    std::vector<double> centroid_cos;
    std::vector<double> mean_feature_std;

    /// 1 - centroid_cos per fraction.
    std::vector<double> delta_mu() const;
    /// mean_feature_std minus its clean value per fraction.
    std::vector<double> delta_sigma() const;
};

/// For each fraction q, masks each sample's top ceil(q*N) attribution-ranked
/// maskable tokens with [UNK] (ranking computed once on the clean sample for
/// its predicted class) and embeds the whole set. fractions must start at 0
/// and increase strictly.
std::vector<EmbeddingSet> masked_embedding_sets(const ClassifierModel& model,
                                                const std::vector<TokenSequence>& samples,
                                                AttributionMethod attr_method,
                                                const std::vector<double>& fractions,
                                                int ig_steps = 30,
                                                const std::string& source = "dataset");

DriftCurve drift_curve_from_sets(const std::vector<EmbeddingSet>& sets);

DriftCurve drift_curve(const ClassifierModel& model, const std::vector<TokenSequence>& samples,
                       AttributionMethod attr_method, const std::vector<double>& fractions,
                       int ig_steps = 30);

struct ProjectedPoint {
    std::string set_name;
    double mask_fraction = 0.0;
    int sample_id = -1;
    double pc1 = 0.0;
    double pc2 = 0.0;
};

/// Projects the union of all sets onto its top-2 principal components
/// (eigendecomposition of the mean-centered covariance). Component signs are
/// fixed by making each component's largest-magnitude loading positive.
/// Errors when the union has fewer than 3 vectors or covariance rank < 2.
std::vector<ProjectedPoint> pca_projection(const std::vector<EmbeddingSet>& sets);

// Artifact IO.
void write_drift_csv(const std::string& path, const DriftCurve& curve);
DriftCurve read_drift_csv(const std::string& path);

void write_embeddings_csv(const std::string& path, const std::vector<EmbeddingSet>& sets);
std::vector<EmbeddingSet> read_embeddings_csv(const std::string& path);

void write_projection_csv(const std::string& path, const std::vector<ProjectedPoint>& points);

}  // namespace masklab
