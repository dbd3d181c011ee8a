#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "masklab/attribution.hpp"
#include "masklab/corpus.hpp"
#include "masklab/model.hpp"

namespace masklab {

enum class AttackKind { saliency_mask, greedy_substitute, char_noise };

std::string_view to_string(AttackKind kind);
AttackKind attack_kind_from_string(std::string_view s);

struct AttackResult {
    TokenSequence original;
    TokenSequence perturbed;
    bool success = false;
    double perturbed_fraction = 0.0;  // changed tokens / maskable count
    int queries = 0;                  // model predictions issued, initial included
    AttackKind attack_kind = AttackKind::saliency_mask;
};

/// Token id -> candidate replacement ids within one vocabulary. No token
/// maps to itself.
class SubstitutionTable {
public:
    void add(int token, std::vector<int> candidates);
    const std::vector<int>* candidates(int token) const;
    bool empty() const { return mapping_.empty(); }
    std::size_t size() const { return mapping_.size(); }

    /// Lines "token<TAB>candidate1,candidate2,...".
    void save(const std::string& path, const Vocab& vocab) const;
    static SubstitutionTable load(const std::string& path, const Vocab& vocab);

    /// Swaps between opposing keyword groups of the generated datasets:
    /// positive <-> negative sentiment words, triggers <-> benign words.
    static SubstitutionTable keyword_swaps(const Vocab& vocab);

private:
    std::map<int, std::vector<int>> mapping_;
};

/// Masks tokens in descending attribution order, at most ceil(budget * N)
/// of them; success iff the predicted class flips within that budget.
AttackResult saliency_mask_attack(const ClassifierModel& model, const TokenSequence& sample,
                                  AttributionMethod attr_method, double budget_fraction,
                                  int ig_steps = 30);

/// Visits tokens in descending attribution order; at each, evaluates every
/// candidate and keeps the one that lowers the original-class probability
/// the most, skipping tokens with no improving candidate. Accepted
/// substitutions are capped at ceil(budget * N).
AttackResult greedy_substitute_attack(const ClassifierModel& model, const TokenSequence& sample,
                                      AttributionMethod attr_method,
                                      const SubstitutionTable& table, double budget_fraction,
                                      const Vocab& vocab, int ig_steps = 30);

/// Transposes two adjacent characters of each visited token (seeded choice)
/// and re-tokenizes against the vocabulary, which under a closed vocab maps
/// the word to [UNK]. Tokens too short or too uniform to transpose are
/// skipped without consuming budget.
AttackResult char_noise_attack(const ClassifierModel& model, const TokenSequence& sample,
                               AttributionMethod attr_method, double budget_fraction,
                               std::uint64_t seed, const Vocab& vocab, int ig_steps = 30);

struct AdvTrainResult {
    TinyTextClassifier model;
    std::vector<double> loss_history;
    double validation_accuracy = 0.0;
    std::size_t mixed_size = 0;  // clean + adversarial, before the 90/10 split
};

/// Fine-tunes a copy of the model on an equal mix of clean samples and
/// successful adversarial samples (larger side downsampled, seeded), with a
/// seeded 90/10 train-validation split. Adversarial samples keep their
/// original labels.
AdvTrainResult adversarial_train(const TinyTextClassifier& model, const Dataset& clean,
                                 const std::vector<AttackResult>& attacks,
                                 const TrainConfig& cfg);

// Artifact IO.
struct AttackRecord {
    std::string original_text;
    std::string perturbed_text;
    int label = -1;
    bool success = false;
    AttackKind attack_kind = AttackKind::saliency_mask;
    double perturbed_fraction = 0.0;
};

void write_attacks_jsonl(const std::string& path, const std::vector<AttackResult>& results);
std::vector<AttackRecord> read_attacks_jsonl(const std::string& path);

}  // namespace masklab
