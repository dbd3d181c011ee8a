#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <doctest.h>

#include "masklab/attribution.hpp"
#include "masklab/corpus.hpp"
#include "masklab/drift.hpp"
#include "masklab/error.hpp"
#include "masklab/model.hpp"
#include "masklab/rng.hpp"
#include "support.hpp"

using namespace masklab;
using namespace masklab::testing;

namespace {

EmbeddingSet make_set(std::vector<Vec> vectors, double fraction = 0.0,
                      std::string source = "test") {
    EmbeddingSet set;
    set.vectors = std::move(vectors);
    set.mask_fraction = fraction;
    set.source = std::move(source);
    return set;
}

TokenSequence plain_seq(int n) {
    TokenSequence s;
    for (int i = 0; i < n; ++i) {
        s.ids.push_back(i + 1);
        s.raw.push_back("w" + std::to_string(i + 1));
    }
    s.maskable.assign(s.ids.size(), true);
    return s;
}

double variance(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) {
        var += (x - mean) * (x - mean);
    }
    return var / static_cast<double>(xs.size());
}

}  // namespace

TEST_CASE("centroid is the component-wise mean") {
    CHECK(centroid(make_set({{1.0, 2.0}, {3.0, 4.0}})) == Vec{2.0, 3.0});
    CHECK(centroid(make_set({{5.0, -1.0, 0.5}})) == Vec{5.0, -1.0, 0.5});
    CHECK(message_of([] { centroid(make_set({})); }).find("empty embedding set") !=
          std::string::npos);
    CHECK(message_of([] { centroid(make_set({{1.0}, {1.0, 2.0}})); })
              .find("dimensions differ") != std::string::npos);
}

TEST_CASE("cosine similarity matches hand values") {
    CHECK(cos_sim({1.0, 0.0}, {0.0, 1.0}) == 0.0);
    CHECK(std::fabs(cos_sim({2.0, 0.0}, {5.0, 0.0}) - 1.0) <= 1e-12);
    CHECK(std::fabs(cos_sim({1.0, 0.0}, {1.0, 1.0}) - 0.70710678) <= 1e-8);
    CHECK(std::fabs(cos_sim({1.0, 2.0, 3.0}, {-1.0, -2.0, -3.0}) + 1.0) <= 1e-12);
    // Scale invariance.
    const Vec a = {0.3, -1.2, 0.7};
    const Vec b = {1.1, 0.4, -0.2};
    Vec a3 = a;
    for (double& x : a3) {
        x *= 3.0;
    }
    CHECK(std::fabs(cos_sim(a3, b) - cos_sim(a, b)) <= 1e-12);

    CHECK(message_of([] { cos_sim({0.0, 0.0}, {1.0, 0.0}); }).find("undefined cosine") !=
          std::string::npos);
    CHECK(message_of([] { cos_sim({1.0}, {1.0, 2.0}); }).find("dimension mismatch") !=
          std::string::npos);
}

TEST_CASE("mean feature std averages per-dimension population deviations") {
    // Per dimension the values are {0, 2}: population std = 1 in both.
    CHECK(std::fabs(mean_feature_std(make_set({{0.0, 0.0}, {2.0, 2.0}})) - 1.0) <= 1e-12);
    // Dimension 0 spans {0, 4} (std 2), dimension 1 is constant (std 0).
    CHECK(std::fabs(mean_feature_std(make_set({{0.0, 7.0}, {4.0, 7.0}})) - 1.0) <= 1e-12);
    CHECK(message_of([] { mean_feature_std(make_set({{1.0, 2.0}})); })
              .find("needs at least 2 vectors") != std::string::npos);

    // Homogeneity: scaling every vector by 3 scales the statistic by 3.
    const auto set = make_set({{0.1, 0.9}, {-0.4, 0.3}, {0.8, -0.2}});
    auto scaled = set;
    for (auto& v : scaled.vectors) {
        for (double& x : v) {
            x *= 3.0;
        }
    }
    CHECK(std::fabs(mean_feature_std(scaled) - 3.0 * mean_feature_std(set)) <= 1e-12);
}

TEST_CASE("a clean-only drift curve is the identity point") {
    const auto sets = std::vector<EmbeddingSet>{
        make_set({{1.0, 0.2}, {0.8, 0.1}, {1.2, 0.3}}, 0.0)};
    const auto curve = drift_curve_from_sets(sets);
    CHECK(curve.mask_fractions == std::vector<double>{0.0});
    CHECK(std::fabs(curve.centroid_cos[0] - 1.0) <= 1e-12);
    CHECK(std::fabs(curve.delta_mu()[0]) <= 1e-12);
    CHECK(curve.delta_sigma() == std::vector<double>{0.0});
    CHECK(std::fabs(curve.mean_feature_std[0] - mean_feature_std(sets[0])) <= 1e-15);

    double mc = 0.0;
    const Vec mu = centroid(sets[0]);
    for (const auto& v : sets[0].vectors) {
        mc += cos_sim(v, mu);
    }
    mc /= 3.0;
    CHECK(curve.mean_cos_to_clean_centroid[0] == mc);
}

TEST_CASE("drift fraction lists are validated") {
    const UnkCountModel m;
    const std::vector<TokenSequence> samples = {plain_seq(4), plain_seq(5)};
    CHECK(message_of([&] { drift_curve(m, samples, AttributionMethod::occlusion, {0.1, 0.5}); })
              .find("must start at 0") != std::string::npos);
    CHECK(message_of([&] { drift_curve(m, samples, AttributionMethod::occlusion, {}); })
              .find("must start at 0") != std::string::npos);
    CHECK(message_of([&] {
              drift_curve(m, samples, AttributionMethod::occlusion, {0.0, 0.3, 0.3});
          }).find("increase strictly") != std::string::npos);
    CHECK(message_of([&] {
              drift_curve(m, samples, AttributionMethod::occlusion, {0.0, 0.5, 1.5});
          }).find("must not exceed 1") != std::string::npos);
    CHECK(message_of([&] { drift_curve(m, {}, AttributionMethod::occlusion, {0.0, 0.5}); })
              .find("no samples") != std::string::npos);

    const LambdaModel opaque(2, [](const TokenSequence&) { return Vec{0.5, 0.5}; });
    CHECK(message_of([&] {
              drift_curve(opaque, samples, AttributionMethod::occlusion, {0.0, 0.5});
          }).find("not embeddable") != std::string::npos);
}

TEST_CASE("each fraction masks the ceiling of q times the maskable count") {
    // UnkCountModel embeds a sample as {number of unk tokens, 1}, so the
    // embedding directly exposes how many tokens were masked.
    const UnkCountModel m;
    const std::vector<TokenSequence> samples = {plain_seq(7), plain_seq(4)};
    const auto sets = masked_embedding_sets(m, samples, AttributionMethod::occlusion,
                                            {0.0, 0.3, 0.5, 1.0});
    REQUIRE(sets.size() == 4);
    CHECK(sets[0].vectors == std::vector<Vec>{{0.0, 1.0}, {0.0, 1.0}});
    CHECK(sets[1].vectors == std::vector<Vec>{{3.0, 1.0}, {2.0, 1.0}});
    CHECK(sets[2].vectors == std::vector<Vec>{{4.0, 1.0}, {2.0, 1.0}});
    CHECK(sets[3].vectors == std::vector<Vec>{{7.0, 1.0}, {4.0, 1.0}});
    for (std::size_t i = 0; i < sets.size(); ++i) {
        CHECK(sets[i].source == "dataset");
    }
    CHECK(sets[1].mask_fraction == 0.3);
}

TEST_CASE("delta curves restate the raw columns") {
    const auto sets = std::vector<EmbeddingSet>{
        make_set({{1.0, 0.0}, {0.9, 0.1}, {1.1, -0.1}}, 0.0),
        make_set({{0.7, 0.3}, {0.6, 0.2}, {0.8, 0.4}}, 0.5)};
    const auto curve = drift_curve_from_sets(sets);
    const auto dmu = curve.delta_mu();
    const auto dsigma = curve.delta_sigma();
    REQUIRE(dmu.size() == 2);
    for (std::size_t i = 0; i < dmu.size(); ++i) {
        CHECK(dmu[i] == 1.0 - curve.centroid_cos[i]);
        CHECK(dsigma[i] == curve.mean_feature_std[i] - curve.mean_feature_std[0]);
    }
    CHECK(dsigma[0] == 0.0);
    CHECK(message_of([&] {
              drift_curve_from_sets({make_set({{1.0, 0.0}}, 0.5)});
          }).find("first set must be the unmasked one") != std::string::npos);
}

TEST_CASE("drift statistics ignore the order of vectors within a set") {
    const auto sets = std::vector<EmbeddingSet>{
        make_set({{1.0, 0.2}, {0.8, 0.4}, {1.3, -0.1}, {0.9, 0.0}}, 0.0),
        make_set({{0.5, 0.5}, {0.4, 0.6}, {0.7, 0.3}, {0.6, 0.2}}, 0.4)};
    auto shuffled = sets;
    std::swap(shuffled[0].vectors[0], shuffled[0].vectors[3]);
    std::swap(shuffled[1].vectors[1], shuffled[1].vectors[2]);
    const auto a = drift_curve_from_sets(sets);
    const auto b = drift_curve_from_sets(shuffled);
    for (std::size_t i = 0; i < a.mask_fractions.size(); ++i) {
        CHECK(std::fabs(a.mean_cos_to_clean_centroid[i] - b.mean_cos_to_clean_centroid[i]) <=
              1e-12);
        CHECK(std::fabs(a.centroid_cos[i] - b.centroid_cos[i]) <= 1e-12);
        CHECK(std::fabs(a.mean_feature_std[i] - b.mean_feature_std[i]) <= 1e-12);
    }
}

TEST_CASE("masking half the salient tokens contracts trained embeddings") {
    const auto gd = generate_dataset(GeneratorSpec::balanced(300, 12, 17));
    TinyTextClassifier model(gd.vocab.size(), 16, 32, 2, stage_seed(17, "model"));
    TrainConfig cfg;
    cfg.epochs = 80;
    cfg.seed = stage_seed(17, "train");
    train(model, gd.dataset, cfg);

    const auto curve = drift_curve(model, gd.dataset.samples,
                                   AttributionMethod::integrated_gradients, {0.0, 0.5});
    REQUIRE(curve.mask_fractions.size() == 2);
    MESSAGE("mean_cos ", curve.mean_cos_to_clean_centroid[0], " -> ",
            curve.mean_cos_to_clean_centroid[1], ", centroid_cos ", curve.centroid_cos[1],
            ", delta_sigma ", curve.delta_sigma()[1]);
    CHECK(curve.delta_sigma()[1] < 0.0);
    CHECK(curve.centroid_cos[1] < 0.999);
    CHECK(curve.mean_cos_to_clean_centroid[1] <
          curve.mean_cos_to_clean_centroid[0]);
}

TEST_CASE("pca projection preserves distances for points on a plane") {
    // Points live on the span of two orthonormal directions in 4D, so the
    // top-2 components recover the plane and pairwise distances survive.
    const Vec u1 = {0.5, 0.5, 0.5, 0.5};
    const Vec u2 = {0.5, -0.5, 0.5, -0.5};
    const std::vector<std::pair<double, double>> coords = {
        {0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {2.0, 1.0}, {-1.0, 2.0}};
    std::vector<Vec> vectors;
    for (const auto& [a, b] : coords) {
        Vec v(4, 0.0);
        for (std::size_t j = 0; j < 4; ++j) {
            v[j] = a * u1[j] + b * u2[j];
        }
        vectors.push_back(std::move(v));
    }
    const auto points = pca_projection({make_set(vectors)});
    REQUIRE(points.size() == coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        for (std::size_t j = i + 1; j < coords.size(); ++j) {
            const double da = coords[i].first - coords[j].first;
            const double db = coords[i].second - coords[j].second;
            const double original = std::sqrt(da * da + db * db);
            const double dp1 = points[i].pc1 - points[j].pc1;
            const double dp2 = points[i].pc2 - points[j].pc2;
            const double projected = std::sqrt(dp1 * dp1 + dp2 * dp2);
            CHECK(std::fabs(projected - original) <= 1e-8);
        }
    }
}

TEST_CASE("pca projections are stable under duplicating the data") {
    const auto base = make_set(
        {{0.2, 1.0, -0.3}, {1.1, 0.4, 0.2}, {-0.5, 0.8, 0.9}, {0.7, -0.6, 0.1}}, 0.0, "clean");
    auto copy = base;
    copy.mask_fraction = 0.5;
    const auto once = pca_projection({base});
    const auto twice = pca_projection({base, copy});
    REQUIRE(twice.size() == 2 * once.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(std::fabs(once[i].pc1 - twice[i].pc1) <= 1e-9);
        CHECK(std::fabs(once[i].pc2 - twice[i].pc2) <= 1e-9);
        CHECK(std::fabs(twice[i].pc1 - twice[once.size() + i].pc1) <= 1e-12);
    }
}

TEST_CASE("the leading component captures at least axis-aligned variance") {
    Rng rng(4242);
    std::vector<Vec> vectors;
    for (int i = 0; i < 40; ++i) {
        Vec v(5);
        for (double& x : v) {
            x = rng.next_double() * 4.0 - 2.0;
        }
        vectors.push_back(std::move(v));
    }
    const auto points = pca_projection({make_set(vectors)});
    std::vector<double> pc1s, pc2s;
    for (const auto& p : points) {
        pc1s.push_back(p.pc1);
        pc2s.push_back(p.pc2);
    }
    const double v1 = variance(pc1s);
    const double v2 = variance(pc2s);
    CHECK(v1 >= v2 - 1e-12);
    for (std::size_t j = 0; j < 5; ++j) {
        std::vector<double> axis;
        for (const auto& v : vectors) {
            axis.push_back(v[j]);
        }
        CHECK(v1 >= variance(axis) - 1e-9);
    }
}

TEST_CASE("pca rejects degenerate inputs") {
    // Collinear points: covariance rank 1.
    std::vector<Vec> line;
    for (int k = 0; k < 4; ++k) {
        line.push_back({1.0 * k, 2.0 * k, 3.0 * k});
    }
    CHECK(message_of([&] { pca_projection({make_set(line)}); }).find("covariance rank 1") !=
          std::string::npos);
    CHECK(message_of([] {
              pca_projection({make_set({{1.0, 2.0}, {3.0, 4.0}})});
          }).find("at least 3 vectors") != std::string::npos);
    CHECK(message_of([] {
              pca_projection({make_set({{1.0}, {2.0}, {3.0}})});
          }).find("dimension >= 2") != std::string::npos);
}

TEST_CASE("embedding sets round-trip through CSV exactly") {
    TempDir dir;
    const std::vector<EmbeddingSet> sets = {
        make_set({{0.125, -3.5}, {1.0 / 3.0, 2e-17}}, 0.0, "clean"),
        make_set({{-0.7071067811865476, 42.0}}, 0.25, "masked")};
    write_embeddings_csv(dir.file("emb.csv"), sets);
    const auto back = read_embeddings_csv(dir.file("emb.csv"));
    REQUIRE(back.size() == 2);
    CHECK(back[0].source == "clean");
    CHECK(back[0].mask_fraction == 0.0);
    CHECK(back[0].vectors == sets[0].vectors);
    CHECK(back[1].source == "masked");
    CHECK(back[1].mask_fraction == 0.25);
    CHECK(back[1].vectors == sets[1].vectors);

    const auto text = read_file(dir.file("emb.csv"));
    CHECK(text.rfind("set_name,mask_fraction,sample_id,dim,value\n", 0) == 0);

    CHECK(message_of([&] { read_embeddings_csv(dir.file("missing.csv")); }).empty() == false);
    write_file(dir.file("bad.csv"), "set_name,mask_fraction,sample_id,dim,value\nclean,0\n");
    CHECK(message_of([&] { read_embeddings_csv(dir.file("bad.csv")); }).find("line 2") !=
          std::string::npos);
    write_file(dir.file("order.csv"),
               "set_name,mask_fraction,sample_id,dim,value\nclean,0,0,1,0.5\n");
    CHECK(message_of([&] { read_embeddings_csv(dir.file("order.csv")); }).find("out of order") !=
          std::string::npos);
}

TEST_CASE("drift curves round-trip through CSV") {
    TempDir dir;
    const auto sets = std::vector<EmbeddingSet>{
        make_set({{1.0, 0.2}, {0.8, 0.1}, {1.2, 0.3}}, 0.0),
        make_set({{0.5, 0.4}, {0.3, 0.5}, {0.7, 0.6}}, 0.5)};
    const auto curve = drift_curve_from_sets(sets);
    write_drift_csv(dir.file("drift.csv"), curve);
    const auto back = read_drift_csv(dir.file("drift.csv"));
    CHECK(back.mask_fractions == curve.mask_fractions);
    CHECK(back.mean_cos_to_clean_centroid == curve.mean_cos_to_clean_centroid);
    CHECK(back.centroid_cos == curve.centroid_cos);
    CHECK(back.mean_feature_std == curve.mean_feature_std);

    const auto text = read_file(dir.file("drift.csv"));
    CHECK(text.rfind("fraction,mean_cos,centroid_cos,mean_feature_std,delta_mu,delta_sigma\n",
                     0) == 0);
    write_file(dir.file("empty.csv"), "");
    CHECK(message_of([&] { read_drift_csv(dir.file("empty.csv")); }).find("empty file") !=
          std::string::npos);
    write_file(dir.file("short.csv"), "header\n1,2,3\n");
    CHECK(message_of([&] { read_drift_csv(dir.file("short.csv")); })
              .find("3 columns, expected 6") != std::string::npos);
}

TEST_CASE("projection CSV lists one row per projected point") {
    TempDir dir;
    const auto points = pca_projection({make_set(
        {{0.2, 1.0, -0.3}, {1.1, 0.4, 0.2}, {-0.5, 0.8, 0.9}, {0.7, -0.6, 0.1}}, 0.0, "clean")});
    write_projection_csv(dir.file("proj.csv"), points);
    const auto text = read_file(dir.file("proj.csv"));
    CHECK(text.rfind("set_name,mask_fraction,sample_id,pc1,pc2\n", 0) == 0);
    std::size_t rows = 0;
    for (char c : text) {
        rows += c == '\n';
    }
    CHECK(rows == points.size() + 1);
    CHECK(text.find("clean,0,0,") != std::string::npos);
}
