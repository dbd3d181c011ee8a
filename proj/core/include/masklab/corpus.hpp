#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace masklab {

/// Closed vocabulary. Id 0 is always the unknown token "[UNK]"; lookup of
/// any string outside the vocabulary yields that id.
class Vocab {
public:
    static constexpr int kUnkId = 0;
    static constexpr std::string_view kUnkToken = "[UNK]";

    /// Vocabulary containing only "[UNK]".
    Vocab();

    /// Builds from a full token list whose first entry must be "[UNK]".
    /// Tokens must be distinct, non-empty and whitespace-free.
    explicit Vocab(const std::vector<std::string>& tokens);

    /// Appends a token if absent; returns its id either way.
    int add(const std::string& token);

    /// Id of a token, or kUnkId when the token is not in the vocabulary.
    int lookup(std::string_view token) const;

    bool contains(std::string_view token) const;
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    /// Plain-text serialization: one token per line, line number = id.
    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    void validate_new_token(const std::string& token) const;

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// One tokenized sample.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<std::string> raw;
    int label = -1;
    std::vector<bool> maskable;

    std::size_t size() const { return ids.size(); }
    std::size_t maskable_count() const;

    /// Surface form: raw tokens joined by single spaces.
    std::string text() const;
};

struct Dataset {
    std::vector<TokenSequence> samples;
    int num_classes = 2;
    std::vector<std::size_t> class_counts;
    std::string name;

    std::size_t size() const { return samples.size(); }
};

enum class GeneratorKind { balanced_sentiment, imbalanced_toxicity };

std::string_view to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(std::string_view s);

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::balanced_sentiment;
    int num_samples = 100;
    int mean_length = 12;
    /// Fixed at 0.5 for balanced_sentiment; defaults to 0.09 for
    /// imbalanced_toxicity.
    double minority_fraction = 0.5;
    std::uint64_t seed = 0;

    static GeneratorSpec balanced(int num_samples, int mean_length, std::uint64_t seed);
    static GeneratorSpec toxicity(int num_samples, int mean_length, std::uint64_t seed,
                                  double minority_fraction = 0.09);
};

/// Lowercases, splits on whitespace and maps tokens to ids; out-of-vocabulary
/// tokens map to the unknown id. All tokens are maskable. The label is left
/// unset (-1). Empty text yields an empty sequence.
TokenSequence tokenize(std::string_view text, const Vocab& vocab);

struct GeneratedData {
    Dataset dataset;
    Vocab vocab;
};

/// Synthetic dataset generation; deterministic in the spec's seed.
GeneratedData generate_dataset(const GeneratorSpec& spec);

/// Loads a JSONL file of {"text": ..., "label": ...} objects. When vocab is
/// null a vocabulary is built from the corpus in first-appearance order
/// (id 0 reserved for "[UNK]"); otherwise the given vocabulary is used and
/// out-of-vocabulary tokens map to the unknown id.
GeneratedData load_jsonl(const std::string& path, const Vocab* vocab = nullptr);

/// Writes one {"text", "label"} object per line.
void save_jsonl(const Dataset& data, const std::string& path);

// Word lists used by the generator. Exposed so attack tables and tests can
// refer to the same token sets.
const std::vector<std::string>& positive_keywords();
const std::vector<std::string>& negative_keywords();
const std::vector<std::string>& neutral_fillers();
const std::vector<std::string>& toxicity_triggers();
const std::vector<std::string>& benign_words();

/// The fixed vocabulary shared by both generators: [UNK] followed by all
/// generator word lists in a stable order.
Vocab generator_vocab();

}  // namespace masklab
