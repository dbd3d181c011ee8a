#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "masklab/corpus.hpp"
#include "masklab/linalg.hpp"

namespace masklab {

struct ModelCapabilities {
    bool differentiable = false;
    bool embeddable = false;
};

/// Probability-vector classifier over token sequences.
class ClassifierModel {
public:
    virtual ~ClassifierModel() = default;

    virtual int num_classes() const = 0;

    /// Length of the vector returned by embed_sample; 0 when the model is
    /// not embeddable.
    virtual int embedding_dim() const = 0;

    virtual ModelCapabilities capabilities() const = 0;

    /// Probability vector of length num_classes, entries in [0, 1] summing
    /// to 1 within 1e-9.
    virtual Vec predict(const TokenSequence& sample) const = 0;

    /// Fixed-length sample embedding. Requires the embeddable capability.
    virtual Vec embed_sample(const TokenSequence& sample) const;

    /// One row per token: the input-embedding vectors the forward pass
    /// consumes. Requires the differentiable capability.
    virtual Matrix input_embeddings(const TokenSequence& sample) const;

    /// Probability vector computed from explicit input-embedding rows
    /// instead of token ids. Requires the differentiable capability.
    virtual Vec predict_from_embeddings(const Matrix& embeddings) const;

    /// Gradient of the softmax probability of target_class with respect to
    /// every entry of the given input-embedding matrix. Requires the
    /// differentiable capability.
    virtual Matrix grad_wrt_inputs(const Matrix& embeddings, int target_class) const;
};

/// Index of the largest probability; first index wins ties.
int argmax(const Vec& probs);

int predicted_class(const ClassifierModel& model, const TokenSequence& sample);

/// Numerically stable softmax.
Vec softmax(const Vec& logits);

/// Embedding table -> mean pool -> tanh hidden layer -> linear head ->
/// softmax, with exact analytic gradients.
class TinyTextClassifier : public ClassifierModel {
public:
    /// All parameters drawn from uniform(-0.1, 0.1), reproducible per seed.
    TinyTextClassifier(int vocab_size, int embed_dim, int hidden_dim, int num_classes,
                       std::uint64_t seed);

    static TinyTextClassifier zeros(int vocab_size, int embed_dim, int hidden_dim,
                                    int num_classes);

    int num_classes() const override { return static_cast<int>(w2.rows()); }
    int embedding_dim() const override { return hidden_dim(); }
    ModelCapabilities capabilities() const override { return {true, true}; }

    int vocab_size() const { return static_cast<int>(embedding.rows()); }
    int embed_dim() const { return static_cast<int>(embedding.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    std::uint64_t seed() const { return seed_; }

    Vec predict(const TokenSequence& sample) const override;
    Vec embed_sample(const TokenSequence& sample) const override;
    Matrix input_embeddings(const TokenSequence& sample) const override;
    Vec predict_from_embeddings(const Matrix& embeddings) const override;
    Matrix grad_wrt_inputs(const Matrix& embeddings, int target_class) const override;

    /// Single-document JSON checkpoint: dims, seed and row-major parameter
    /// arrays. Loading reproduces predictions exactly.
    void save(const std::string& path) const;
    static TinyTextClassifier load(const std::string& path);

    Matrix embedding;  // vocab_size x embed_dim
    Matrix w1;         // hidden_dim x embed_dim
    Vec b1;            // hidden_dim
    Matrix w2;         // num_classes x hidden_dim
    Vec b2;            // num_classes

private:
    TinyTextClassifier() = default;

    Vec pooled(const Matrix& embeddings) const;
    Vec hidden(const Vec& pooled) const;

    std::uint64_t seed_ = 0;
};

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 20;
    int batch_size = 16;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    bool shuffle = true;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Mean cross-entropy of the model over labeled samples.
double mean_cross_entropy(const TinyTextClassifier& model,
                          const std::vector<TokenSequence>& samples);

/// Cross-entropy gradients averaged over a batch, one tensor per parameter.
struct ModelGradients {
    Matrix embedding;
    Matrix w1;
    Vec b1;
    Matrix w2;
    Vec b2;
};

ModelGradients loss_gradients(const TinyTextClassifier& model,
                              const std::vector<TokenSequence>& batch);

/// Mini-batch gradient descent on mean cross-entropy. Mutates the model in
/// place and returns the mean loss over the full dataset after each epoch.
/// Aborts with an error if any loss or parameter turns non-finite.
std::vector<double> train(TinyTextClassifier& model, const Dataset& data,
                          const TrainConfig& cfg);

/// Scripted classifier: each predict call returns the next probability
/// vector of the script and errors once the script is exhausted.
class ReplayModel : public ClassifierModel {
public:
    explicit ReplayModel(std::vector<Vec> script);

    int num_classes() const override { return static_cast<int>(script_.front().size()); }
    int embedding_dim() const override { return 0; }
    ModelCapabilities capabilities() const override { return {false, false}; }

    Vec predict(const TokenSequence& sample) const override;

    std::size_t cursor() const { return cursor_; }
    std::size_t script_size() const { return script_.size(); }
    void reset() const { cursor_ = 0; }

private:
    std::vector<Vec> script_;
    mutable std::size_t cursor_ = 0;
};

}  // namespace masklab
