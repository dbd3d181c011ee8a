#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "masklab/corpus.hpp"
#include "masklab/error.hpp"
#include "masklab/linalg.hpp"
#include "masklab/model.hpp"

namespace masklab::testing {

/// Unique directory under the system temp root, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("masklab_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("test support: cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) {
        throw std::runtime_error("test support: cannot write " + path);
    }
}

/// Runs fn, returns the message of the expected exception type, or the empty
/// string if fn does not throw it.
template <typename E = Error, typename Fn>
std::string message_of(Fn&& fn) {
    try {
        fn();
    } catch (const E& e) {
        return e.what();
    } catch (...) {
    }
    return {};
}

/// Two-class model exactly linear in its input embeddings:
/// P(class 1) = 0.5 + w . mean(rows). Integrated gradients against this
/// model have the closed form score_i = (w . x_i) / n for every step count.
class LinearProbModel : public ClassifierModel {
public:
    LinearProbModel(Matrix table, Vec weights)
        : table_(std::move(table)), w_(std::move(weights)) {}

    int num_classes() const override { return 2; }
    int embedding_dim() const override { return 0; }
    ModelCapabilities capabilities() const override { return {true, false}; }

    Vec predict(const TokenSequence& sample) const override {
        return predict_from_embeddings(input_embeddings(sample));
    }

    Matrix input_embeddings(const TokenSequence& sample) const override {
        Matrix x(sample.ids.size(), table_.cols());
        for (std::size_t i = 0; i < sample.ids.size(); ++i) {
            for (std::size_t j = 0; j < table_.cols(); ++j) {
                x(i, j) = table_(static_cast<std::size_t>(sample.ids[i]), j);
            }
        }
        return x;
    }

    Vec predict_from_embeddings(const Matrix& embeddings) const override {
        Vec pooled(embeddings.cols(), 0.0);
        for (std::size_t r = 0; r < embeddings.rows(); ++r) {
            for (std::size_t c = 0; c < embeddings.cols(); ++c) {
                pooled[c] += embeddings(r, c);
            }
        }
        for (double& v : pooled) {
            v /= static_cast<double>(embeddings.rows());
        }
        const double f1 = 0.5 + dot(w_, pooled);
        return {1.0 - f1, f1};
    }

    Matrix grad_wrt_inputs(const Matrix& embeddings, int target_class) const override {
        const double sign = target_class == 1 ? 1.0 : -1.0;
        Matrix g(embeddings.rows(), embeddings.cols());
        for (std::size_t r = 0; r < embeddings.rows(); ++r) {
            for (std::size_t c = 0; c < embeddings.cols(); ++c) {
                g(r, c) = sign * w_[c] / static_cast<double>(embeddings.rows());
            }
        }
        return g;
    }

    const Vec& weights() const { return w_; }

private:
    Matrix table_;
    Vec w_;
};

inline int count_unks(const TokenSequence& sample) {
    int n = 0;
    for (int id : sample.ids) {
        n += id == Vocab::kUnkId;
    }
    return n;
}

/// Prediction driven by an arbitrary function of the sample; neither
/// differentiable nor embeddable.
class LambdaModel : public ClassifierModel {
public:
    using Fn = std::function<Vec(const TokenSequence&)>;

    LambdaModel(int num_classes, Fn fn) : num_classes_(num_classes), fn_(std::move(fn)) {}

    int num_classes() const override { return num_classes_; }
    int embedding_dim() const override { return 0; }
    ModelCapabilities capabilities() const override { return {false, false}; }
    Vec predict(const TokenSequence& sample) const override { return fn_(sample); }

private:
    int num_classes_;
    Fn fn_;
};

/// Embeddable stub whose embedding is {number of [UNK] ids, 1}; constant
/// prediction, so occlusion ranks tokens by ascending index.
class UnkCountModel : public ClassifierModel {
public:
    int num_classes() const override { return 2; }
    int embedding_dim() const override { return 2; }
    ModelCapabilities capabilities() const override { return {false, true}; }
    Vec predict(const TokenSequence&) const override { return {0.6, 0.4}; }
    Vec embed_sample(const TokenSequence& sample) const override {
        return {static_cast<double>(count_unks(sample)), 1.0};
    }
};

/// Central finite differences of target-class probability with respect to
/// every input-embedding entry.
inline Matrix fd_input_gradient(const ClassifierModel& model, const Matrix& x, int target_class,
                                double h = 1e-4) {
    Matrix g(x.rows(), x.cols());
    Matrix probe = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            probe(r, c) = x(r, c) + h;
            const double up = model.predict_from_embeddings(probe)[target_class];
            probe(r, c) = x(r, c) - h;
            const double down = model.predict_from_embeddings(probe)[target_class];
            probe(r, c) = x(r, c);
            g(r, c) = (up - down) / (2.0 * h);
        }
    }
    return g;
}

/// Relative error with an absolute-error floor for near-zero pairs.
inline double rel_err(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / scale;
}

inline Dataset make_dataset(std::vector<TokenSequence> samples, int num_classes,
                            const std::string& name) {
    Dataset d;
    d.samples = std::move(samples);
    d.num_classes = num_classes;
    d.name = name;
    d.class_counts.assign(static_cast<std::size_t>(num_classes), 0);
    for (const auto& s : d.samples) {
        ++d.class_counts[static_cast<std::size_t>(s.label)];
    }
    return d;
}

}  // namespace masklab::testing
