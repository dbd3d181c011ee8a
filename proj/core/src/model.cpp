#include "masklab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "masklab/error.hpp"
#include "masklab/rng.hpp"

namespace masklab {

namespace {

[[noreturn]] void capability_error(const char* what) {
    throw Error(std::string("model does not support ") + what);
}

void check_sample(const TokenSequence& sample, int vocab_size) {
    if (sample.ids.empty()) {
        throw Error("empty input");
    }
    for (int id : sample.ids) {
        if (id < 0 || id >= vocab_size) {
            throw Error("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(vocab_size));
        }
    }
}

}  // namespace

Vec ClassifierModel::embed_sample(const TokenSequence&) const {
    capability_error("sample embeddings");
}

Matrix ClassifierModel::input_embeddings(const TokenSequence&) const {
    capability_error("input embeddings");
}

Vec ClassifierModel::predict_from_embeddings(const Matrix&) const {
    capability_error("input embeddings");
}

Matrix ClassifierModel::grad_wrt_inputs(const Matrix&, int) const {
    capability_error("gradients");
}

int argmax(const Vec& probs) {
    if (probs.empty()) {
        throw Error("argmax of empty vector");
    }
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

int predicted_class(const ClassifierModel& model, const TokenSequence& sample) {
    return argmax(model.predict(sample));
}

Vec softmax(const Vec& logits) {
    if (logits.empty()) {
        throw Error("softmax of empty vector");
    }
    const double zmax = *std::max_element(logits.begin(), logits.end());
    Vec out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - zmax);
        sum += out[i];
    }
    for (double& v : out) {
        v /= sum;
    }
    return out;
}

TinyTextClassifier::TinyTextClassifier(int vocab_size, int embed_dim, int hidden_dim,
                                       int num_classes, std::uint64_t seed)
    : seed_(seed) {
    if (vocab_size < 1 || embed_dim < 1 || hidden_dim < 1 || num_classes < 2) {
        throw ConfigError("model dims must satisfy vocab>=1, embed>=1, hidden>=1, classes>=2");
    }
    embedding = Matrix(static_cast<std::size_t>(vocab_size), static_cast<std::size_t>(embed_dim));
    w1 = Matrix(static_cast<std::size_t>(hidden_dim), static_cast<std::size_t>(embed_dim));
    b1.assign(static_cast<std::size_t>(hidden_dim), 0.0);
    w2 = Matrix(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(hidden_dim));
    b2.assign(static_cast<std::size_t>(num_classes), 0.0);

    Rng rng(stage_seed(seed, "model.init"));
    for (Vec* tensor : {&embedding.data(), &w1.data(), &b1, &w2.data(), &b2}) {
        for (double& v : *tensor) {
            v = rng.uniform(-0.1, 0.1);
        }
    }
}

TinyTextClassifier TinyTextClassifier::zeros(int vocab_size, int embed_dim, int hidden_dim,
                                             int num_classes) {
    TinyTextClassifier m(vocab_size, embed_dim, hidden_dim, num_classes, 0);
    for (Vec* tensor : {&m.embedding.data(), &m.w1.data(), &m.b1, &m.w2.data(), &m.b2}) {
        std::fill(tensor->begin(), tensor->end(), 0.0);
    }
    return m;
}

Vec TinyTextClassifier::pooled(const Matrix& embeddings) const {
    const std::size_t n = embeddings.rows();
    Vec p(embeddings.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            p[j] += embeddings(i, j);
        }
    }
    for (double& v : p) {
        v /= static_cast<double>(n);
    }
    return p;
}

Vec TinyTextClassifier::hidden(const Vec& p) const {
    Vec a(w1.rows());
    for (std::size_t i = 0; i < w1.rows(); ++i) {
        double acc = b1[i];
        for (std::size_t j = 0; j < w1.cols(); ++j) {
            acc += w1(i, j) * p[j];
        }
        a[i] = std::tanh(acc);
    }
    return a;
}

Matrix TinyTextClassifier::input_embeddings(const TokenSequence& sample) const {
    check_sample(sample, vocab_size());
    Matrix rows(sample.ids.size(), embedding.cols());
    for (std::size_t i = 0; i < sample.ids.size(); ++i) {
        for (std::size_t j = 0; j < embedding.cols(); ++j) {
            rows(i, j) = embedding(static_cast<std::size_t>(sample.ids[i]), j);
        }
    }
    return rows;
}

Vec TinyTextClassifier::predict_from_embeddings(const Matrix& embeddings) const {
    if (embeddings.rows() == 0) {
        throw Error("empty input");
    }
    if (embeddings.cols() != embedding.cols()) {
        throw Error("input embeddings have width " + std::to_string(embeddings.cols()) +
                    ", expected " + std::to_string(embedding.cols()));
    }
    const Vec a = hidden(pooled(embeddings));
    Vec z(w2.rows());
    for (std::size_t t = 0; t < w2.rows(); ++t) {
        double acc = b2[t];
        for (std::size_t i = 0; i < w2.cols(); ++i) {
            acc += w2(t, i) * a[i];
        }
        z[t] = acc;
    }
    return softmax(z);
}

Vec TinyTextClassifier::predict(const TokenSequence& sample) const {
    return predict_from_embeddings(input_embeddings(sample));
}

Vec TinyTextClassifier::embed_sample(const TokenSequence& sample) const {
    return hidden(pooled(input_embeddings(sample)));
}

Matrix TinyTextClassifier::grad_wrt_inputs(const Matrix& embeddings, int target_class) const {
    if (target_class < 0 || target_class >= num_classes()) {
        throw Error("target class " + std::to_string(target_class) + " out of range");
    }
    const std::size_t n = embeddings.rows();
    const Vec probs = predict_from_embeddings(embeddings);
    const Vec a = hidden(pooled(embeddings));

    // dP(t)/dz_j = s_t (delta_tj - s_j)
    const auto t = static_cast<std::size_t>(target_class);
    Vec g_z(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j) {
        g_z[j] = probs[t] * ((j == t ? 1.0 : 0.0) - probs[j]);
    }

    Vec g_a(w2.cols(), 0.0);
    for (std::size_t j = 0; j < w2.rows(); ++j) {
        for (std::size_t i = 0; i < w2.cols(); ++i) {
            g_a[i] += w2(j, i) * g_z[j];
        }
    }

    Vec g_pre(g_a.size());
    for (std::size_t i = 0; i < g_a.size(); ++i) {
        g_pre[i] = (1.0 - a[i] * a[i]) * g_a[i];
    }

    Vec g_p(w1.cols(), 0.0);
    for (std::size_t i = 0; i < w1.rows(); ++i) {
        for (std::size_t j = 0; j < w1.cols(); ++j) {
            g_p[j] += w1(i, j) * g_pre[i];
        }
    }

    // Mean pooling spreads the same gradient over every row, scaled by 1/n.
    Matrix grad(n, embeddings.cols());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < grad.cols(); ++j) {
            grad(i, j) = g_p[j] / static_cast<double>(n);
        }
    }
    if (!all_finite(grad)) {
        throw Error("non-finite gradient");
    }
    return grad;
}

void TinyTextClassifier::save(const std::string& path) const {
    nlohmann::ordered_json doc;
    doc["vocab_size"] = vocab_size();
    doc["embed_dim"] = embed_dim();
    doc["hidden_dim"] = hidden_dim();
    doc["num_classes"] = num_classes();
    doc["seed"] = seed_;
    doc["embedding"] = embedding.data();
    doc["w1"] = w1.data();
    doc["b1"] = b1;
    doc["w2"] = w2.data();
    doc["b2"] = b2;

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("checkpoint: cannot open \"" + path + "\" for writing");
    }
    out << doc.dump(2) << '\n';
}

TinyTextClassifier TinyTextClassifier::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("checkpoint: cannot open \"" + path + "\"");
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("checkpoint: \"" + path + "\" is not valid JSON: " + e.what());
    }

    const auto require = [&](const char* key) -> const nlohmann::json& {
        if (!doc.contains(key)) {
            throw Error(std::string("checkpoint: missing key \"") + key + "\"");
        }
        return doc[key];
    };

    TinyTextClassifier m;
    const int vocab = require("vocab_size").get<int>();
    const int dim = require("embed_dim").get<int>();
    const int hid = require("hidden_dim").get<int>();
    const int classes = require("num_classes").get<int>();
    if (vocab < 1 || dim < 1 || hid < 1 || classes < 2) {
        throw Error("checkpoint: invalid dims");
    }
    m.seed_ = require("seed").get<std::uint64_t>();

    const auto load_tensor = [&](const char* key, std::size_t expected) {
        auto values = require(key).get<Vec>();
        if (values.size() != expected) {
            throw Error(std::string("checkpoint: \"") + key + "\" has " +
                        std::to_string(values.size()) + " values, expected " +
                        std::to_string(expected));
        }
        if (!all_finite(values)) {
            throw Error(std::string("checkpoint: \"") + key + "\" contains non-finite values");
        }
        return values;
    };

    const auto sz = [](int v) { return static_cast<std::size_t>(v); };
    m.embedding = Matrix(sz(vocab), sz(dim));
    m.embedding.data() = load_tensor("embedding", sz(vocab) * sz(dim));
    m.w1 = Matrix(sz(hid), sz(dim));
    m.w1.data() = load_tensor("w1", sz(hid) * sz(dim));
    m.b1 = load_tensor("b1", sz(hid));
    m.w2 = Matrix(sz(classes), sz(hid));
    m.w2.data() = load_tensor("w2", sz(classes) * sz(hid));
    m.b2 = load_tensor("b2", sz(classes));
    return m;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 1e-6 && learning_rate <= 1.0)) {
        throw ConfigError("learning_rate must be in [1e-6, 1]");
    }
    if (epochs < 0 || epochs > 10000) {
        throw ConfigError("epochs must be in [0, 10000]");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw ConfigError("weight_decay must be non-negative");
    }
}

double mean_cross_entropy(const TinyTextClassifier& model,
                          const std::vector<TokenSequence>& samples) {
    if (samples.empty()) {
        throw Error("cross-entropy over empty sample set");
    }
    double total = 0.0;
    for (const auto& s : samples) {
        if (s.label < 0 || s.label >= model.num_classes()) {
            throw Error("sample label " + std::to_string(s.label) + " out of range");
        }
        const Vec probs = model.predict(s);
        total += -std::log(probs[static_cast<std::size_t>(s.label)]);
    }
    return total / static_cast<double>(samples.size());
}

ModelGradients loss_gradients(const TinyTextClassifier& model,
                              const std::vector<TokenSequence>& batch) {
    if (batch.empty()) {
        throw Error("gradient over empty batch");
    }
    ModelGradients g;
    g.embedding = Matrix(model.embedding.rows(), model.embedding.cols());
    g.w1 = Matrix(model.w1.rows(), model.w1.cols());
    g.b1.assign(model.b1.size(), 0.0);
    g.w2 = Matrix(model.w2.rows(), model.w2.cols());
    g.b2.assign(model.b2.size(), 0.0);

    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& sample : batch) {
        if (sample.label < 0 || sample.label >= model.num_classes()) {
            throw Error("sample label " + std::to_string(sample.label) + " out of range");
        }
        const Matrix rows = model.input_embeddings(sample);
        const std::size_t n = rows.rows();

        Vec p(rows.cols(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < p.size(); ++j) {
                p[j] += rows(i, j);
            }
        }
        for (double& v : p) {
            v /= static_cast<double>(n);
        }

        Vec pre(model.w1.rows());
        Vec a(model.w1.rows());
        for (std::size_t i = 0; i < model.w1.rows(); ++i) {
            double acc = model.b1[i];
            for (std::size_t j = 0; j < model.w1.cols(); ++j) {
                acc += model.w1(i, j) * p[j];
            }
            pre[i] = acc;
            a[i] = std::tanh(acc);
        }

        Vec z(model.w2.rows());
        for (std::size_t t = 0; t < model.w2.rows(); ++t) {
            double acc = model.b2[t];
            for (std::size_t i = 0; i < model.w2.cols(); ++i) {
                acc += model.w2(t, i) * a[i];
            }
            z[t] = acc;
        }
        const Vec probs = softmax(z);

        // d(-log p_y)/dz = probs - onehot(y)
        Vec g_z = probs;
        g_z[static_cast<std::size_t>(sample.label)] -= 1.0;

        for (std::size_t t = 0; t < model.w2.rows(); ++t) {
            g.b2[t] += scale * g_z[t];
            for (std::size_t i = 0; i < model.w2.cols(); ++i) {
                g.w2(t, i) += scale * g_z[t] * a[i];
            }
        }

        Vec g_a(model.w2.cols(), 0.0);
        for (std::size_t t = 0; t < model.w2.rows(); ++t) {
            for (std::size_t i = 0; i < model.w2.cols(); ++i) {
                g_a[i] += model.w2(t, i) * g_z[t];
            }
        }

        Vec g_pre(g_a.size());
        for (std::size_t i = 0; i < g_a.size(); ++i) {
            g_pre[i] = (1.0 - a[i] * a[i]) * g_a[i];
        }

        for (std::size_t i = 0; i < model.w1.rows(); ++i) {
            g.b1[i] += scale * g_pre[i];
            for (std::size_t j = 0; j < model.w1.cols(); ++j) {
                g.w1(i, j) += scale * g_pre[i] * p[j];
            }
        }

        Vec g_p(model.w1.cols(), 0.0);
        for (std::size_t i = 0; i < model.w1.rows(); ++i) {
            for (std::size_t j = 0; j < model.w1.cols(); ++j) {
                g_p[j] += model.w1(i, j) * g_pre[i];
            }
        }

        const double row_scale = scale / static_cast<double>(n);
        for (int id : sample.ids) {
            for (std::size_t j = 0; j < g.embedding.cols(); ++j) {
                g.embedding(static_cast<std::size_t>(id), j) += row_scale * g_p[j];
            }
        }
    }
    return g;
}

namespace {

void apply_update(TinyTextClassifier& model, const ModelGradients& g, double lr,
                  double weight_decay) {
    const auto step = [&](Vec& param, const Vec& grad, bool decay) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            param[i] -= lr * (grad[i] + (decay ? weight_decay * param[i] : 0.0));
        }
    };
    step(model.embedding.data(), g.embedding.data(), true);
    step(model.w1.data(), g.w1.data(), true);
    step(model.b1, g.b1, false);
    step(model.w2.data(), g.w2.data(), true);
    step(model.b2, g.b2, false);
}

bool params_finite(const TinyTextClassifier& m) {
    return all_finite(m.embedding) && all_finite(m.w1) && all_finite(m.b1) &&
           all_finite(m.w2) && all_finite(m.b2);
}

}  // namespace

std::vector<double> train(TinyTextClassifier& model, const Dataset& data,
                          const TrainConfig& cfg) {
    cfg.validate();
    if (data.samples.empty()) {
        throw Error("train: empty dataset");
    }
    if (data.num_classes != model.num_classes()) {
        throw Error("train: dataset has " + std::to_string(data.num_classes) +
                    " classes, model has " + std::to_string(model.num_classes()));
    }

    Rng shuffle_rng(stage_seed(cfg.seed, "train.shuffle"));
    std::vector<std::size_t> order(data.samples.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));
    std::vector<TokenSequence> batch;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) {
            shuffle_rng.shuffle(order);
        }
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.assign(end - start, TokenSequence{});
            for (std::size_t i = start; i < end; ++i) {
                batch[i - start] = data.samples[order[i]];
            }
            const ModelGradients g = loss_gradients(model, batch);
            apply_update(model, g, cfg.learning_rate, cfg.weight_decay);
            if (!params_finite(model)) {
                throw Error("train: parameters turned non-finite at epoch " +
                            std::to_string(epoch));
            }
        }
        const double loss = mean_cross_entropy(model, data.samples);
        if (!std::isfinite(loss)) {
            throw Error("train: non-finite loss at epoch " + std::to_string(epoch));
        }
        history.push_back(loss);
    }
    return history;
}

ReplayModel::ReplayModel(std::vector<Vec> script) : script_(std::move(script)) {
    if (script_.empty()) {
        throw Error("replay script is empty");
    }
    const std::size_t classes = script_.front().size();
    if (classes < 2) {
        throw Error("replay script entries need at least two classes");
    }
    for (const auto& entry : script_) {
        if (entry.size() != classes) {
            throw Error("replay script entries have inconsistent lengths");
        }
        double sum = 0.0;
        for (double v : entry) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error("replay script probability out of [0, 1]");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw Error("replay script entry does not sum to 1");
        }
    }
}

Vec ReplayModel::predict(const TokenSequence&) const {
    if (cursor_ >= script_.size()) {
        throw Error("replay script exhausted after " + std::to_string(script_.size()) +
                    " predictions");
    }
    return script_[cursor_++];
}

}  // namespace masklab
