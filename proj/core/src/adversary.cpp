#include "masklab/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "io_util.hpp"
#include "masklab/error.hpp"
#include "masklab/rng.hpp"

namespace masklab {

std::string_view to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::saliency_mask:
            return "saliency_mask";
        case AttackKind::greedy_substitute:
            return "greedy_substitute";
        case AttackKind::char_noise:
            return "char_noise";
    }
    throw Error("unknown attack kind");
}

AttackKind attack_kind_from_string(std::string_view s) {
    if (s == "saliency_mask") {
        return AttackKind::saliency_mask;
    }
    if (s == "greedy_substitute") {
        return AttackKind::greedy_substitute;
    }
    if (s == "char_noise") {
        return AttackKind::char_noise;
    }
    throw ConfigError("unknown attack kind \"" + std::string(s) + "\"");
}

void SubstitutionTable::add(int token, std::vector<int> candidates) {
    if (token < 0) {
        throw Error("substitution table: negative token id");
    }
    if (candidates.empty()) {
        throw Error("substitution table: token " + std::to_string(token) + " has no candidates");
    }
    for (int c : candidates) {
        if (c < 0) {
            throw Error("substitution table: negative candidate id");
        }
        if (c == token) {
            throw Error("substitution table: token " + std::to_string(token) +
                        " maps to itself");
        }
    }
    mapping_[token] = std::move(candidates);
}

const std::vector<int>* SubstitutionTable::candidates(int token) const {
    auto it = mapping_.find(token);
    return it == mapping_.end() ? nullptr : &it->second;
}

void SubstitutionTable::save(const std::string& path, const Vocab& vocab) const {
    auto out = detail::open_out(path, "substitution table");
    for (const auto& [token, cands] : mapping_) {
        out << vocab.token(token) << '\t';
        for (std::size_t i = 0; i < cands.size(); ++i) {
            if (i > 0) {
                out << ',';
            }
            out << vocab.token(cands[i]);
        }
        out << '\n';
    }
}

SubstitutionTable SubstitutionTable::load(const std::string& path, const Vocab& vocab) {
    auto in = detail::open_in(path, "substitution table");
    SubstitutionTable table;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error("substitution table: line " + std::to_string(line_number) +
                        " has no tab separator");
        }
        const std::string token = line.substr(0, tab);
        if (!vocab.contains(token)) {
            throw Error("substitution table: line " + std::to_string(line_number) +
                        ": token \"" + token + "\" not in vocabulary");
        }
        std::vector<int> cands;
        std::istringstream rest(line.substr(tab + 1));
        std::string cand;
        while (std::getline(rest, cand, ',')) {
            if (!vocab.contains(cand)) {
                throw Error("substitution table: line " + std::to_string(line_number) +
                            ": candidate \"" + cand + "\" not in vocabulary");
            }
            cands.push_back(vocab.lookup(cand));
        }
        if (cands.empty()) {
            throw Error("substitution table: line " + std::to_string(line_number) +
                        " has no candidates");
        }
        table.add(vocab.lookup(token), std::move(cands));
    }
    return table;
}

SubstitutionTable SubstitutionTable::keyword_swaps(const Vocab& vocab) {
    SubstitutionTable table;
    const auto ids_present = [&vocab](const std::vector<std::string>& words) {
        std::vector<int> ids;
        for (const auto& w : words) {
            if (vocab.contains(w)) {
                ids.push_back(vocab.lookup(w));
            }
        }
        return ids;
    };
    const auto cross = [&](const std::vector<std::string>& from,
                           const std::vector<std::string>& to) {
        const std::vector<int> cands = ids_present(to);
        if (cands.empty()) {
            return;
        }
        for (int id : ids_present(from)) {
            table.add(id, cands);
        }
    };
    cross(positive_keywords(), negative_keywords());
    cross(negative_keywords(), positive_keywords());
    cross(toxicity_triggers(), benign_words());
    cross(benign_words(), toxicity_triggers());
    return table;
}

namespace {

void check_budget(double budget_fraction) {
    if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) {
        throw Error("attack budget must be in (0, 1]");
    }
}

int budget_steps(double budget_fraction, std::size_t maskable) {
    return static_cast<int>(std::ceil(budget_fraction * static_cast<double>(maskable)));
}

std::vector<int> attack_order(const ClassifierModel& model, const TokenSequence& sample,
                              AttributionMethod attr_method, int ig_steps, int y0) {
    const AttributionVector attr = attribute(model, sample, y0, attr_method, ig_steps);
    return rank_tokens(attr, sample.maskable);
}

}  // namespace

AttackResult saliency_mask_attack(const ClassifierModel& model, const TokenSequence& sample,
                                  AttributionMethod attr_method, double budget_fraction,
                                  int ig_steps) {
    check_budget(budget_fraction);
    AttackResult result;
    result.attack_kind = AttackKind::saliency_mask;
    result.original = sample;

    const Vec probs0 = model.predict(sample);
    result.queries = 1;
    const int y0 = argmax(probs0);
    const std::vector<int> order = attack_order(model, sample, attr_method, ig_steps, y0);
    const int cap = budget_steps(budget_fraction, order.size());

    TokenSequence current = sample;
    int taken = 0;
    for (int idx : order) {
        if (taken >= cap) {
            break;
        }
        current.ids[static_cast<std::size_t>(idx)] = Vocab::kUnkId;
        current.raw[static_cast<std::size_t>(idx)] = Vocab::kUnkToken;
        ++taken;
        const Vec probs = model.predict(current);
        ++result.queries;
        if (argmax(probs) != y0) {
            result.success = true;
            break;
        }
    }
    result.perturbed = std::move(current);
    result.perturbed_fraction = static_cast<double>(taken) / static_cast<double>(order.size());
    return result;
}

AttackResult greedy_substitute_attack(const ClassifierModel& model, const TokenSequence& sample,
                                      AttributionMethod attr_method,
                                      const SubstitutionTable& table, double budget_fraction,
                                      const Vocab& vocab, int ig_steps) {
    check_budget(budget_fraction);
    if (table.empty()) {
        throw Error("greedy_substitute_attack: empty substitution table");
    }
    AttackResult result;
    result.attack_kind = AttackKind::greedy_substitute;
    result.original = sample;

    const Vec probs0 = model.predict(sample);
    result.queries = 1;
    const int y0 = argmax(probs0);
    const auto y0s = static_cast<std::size_t>(y0);
    const std::vector<int> order = attack_order(model, sample, attr_method, ig_steps, y0);
    const int cap = budget_steps(budget_fraction, order.size());

    TokenSequence current = sample;
    double p_cur = probs0[y0s];
    int accepted = 0;
    for (int idx : order) {
        if (accepted >= cap) {
            break;
        }
        const auto pos = static_cast<std::size_t>(idx);
        const std::vector<int>* cands = table.candidates(current.ids[pos]);
        if (cands == nullptr) {
            continue;
        }
        int best_id = -1;
        double best_p = p_cur;
        Vec best_probs;
        TokenSequence trial = current;
        for (int cand : *cands) {
            trial.ids[pos] = cand;
            const Vec probs = model.predict(trial);
            ++result.queries;
            if (probs[y0s] < best_p) {
                best_p = probs[y0s];
                best_id = cand;
                best_probs = probs;
            }
        }
        if (best_id < 0) {
            continue;  // nothing improved at this position
        }
        current.ids[pos] = best_id;
        current.raw[pos] = vocab.token(best_id);
        p_cur = best_p;
        ++accepted;
        if (argmax(best_probs) != y0) {
            result.success = true;
            break;
        }
    }
    result.perturbed = std::move(current);
    result.perturbed_fraction = static_cast<double>(accepted) / static_cast<double>(order.size());
    return result;
}

AttackResult char_noise_attack(const ClassifierModel& model, const TokenSequence& sample,
                               AttributionMethod attr_method, double budget_fraction,
                               std::uint64_t seed, const Vocab& vocab, int ig_steps) {
    check_budget(budget_fraction);
    AttackResult result;
    result.attack_kind = AttackKind::char_noise;
    result.original = sample;

    const Vec probs0 = model.predict(sample);
    result.queries = 1;
    const int y0 = argmax(probs0);
    const std::vector<int> order = attack_order(model, sample, attr_method, ig_steps, y0);
    const int cap = budget_steps(budget_fraction, order.size());

    Rng rng(stage_seed(seed, "attack.char_noise"));
    TokenSequence current = sample;
    int taken = 0;
    for (int idx : order) {
        if (taken >= cap) {
            break;
        }
        const auto pos = static_cast<std::size_t>(idx);
        const std::string& word = current.raw[pos];
        std::vector<std::size_t> swappable;
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            if (word[i] != word[i + 1]) {
                swappable.push_back(i);
            }
        }
        if (swappable.empty()) {
            continue;  // single-char or uniform word: no visible transposition
        }
        std::string noisy = word;
        const std::size_t at = swappable[rng.bounded(swappable.size())];
        std::swap(noisy[at], noisy[at + 1]);
        current.ids[pos] = vocab.lookup(noisy);
        current.raw[pos] = std::move(noisy);
        ++taken;
        const Vec probs = model.predict(current);
        ++result.queries;
        if (argmax(probs) != y0) {
            result.success = true;
            break;
        }
    }
    result.perturbed = std::move(current);
    result.perturbed_fraction = static_cast<double>(taken) / static_cast<double>(order.size());
    return result;
}

AdvTrainResult adversarial_train(const TinyTextClassifier& model, const Dataset& clean,
                                 const std::vector<AttackResult>& attacks,
                                 const TrainConfig& cfg) {
    if (attacks.empty()) {
        throw Error("adversarial_train: no attacks given");
    }
    std::vector<TokenSequence> adversarial;
    for (const auto& attack : attacks) {
        if (!attack.success) {
            continue;
        }
        TokenSequence sample = attack.perturbed;
        sample.label = attack.original.label;
        adversarial.push_back(std::move(sample));
    }
    if (adversarial.empty()) {
        throw Error("adversarial_train: zero successful attacks");
    }
    if (clean.samples.empty()) {
        throw Error("adversarial_train: empty clean dataset");
    }

    Rng rng(stage_seed(cfg.seed, "advtrain.mix"));
    const std::size_t n = std::min(clean.samples.size(), adversarial.size());
    const auto take = [&rng, n](const std::vector<TokenSequence>& pool) {
        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        std::vector<TokenSequence> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(pool[idx[i]]);
        }
        return out;
    };

    std::vector<TokenSequence> mixed = take(clean.samples);
    {
        std::vector<TokenSequence> adv_part = take(adversarial);
        mixed.insert(mixed.end(), std::make_move_iterator(adv_part.begin()),
                     std::make_move_iterator(adv_part.end()));
    }
    std::vector<std::size_t> mix_order(mixed.size());
    std::iota(mix_order.begin(), mix_order.end(), 0);
    rng.shuffle(mix_order);

    const std::size_t train_count = mixed.size() * 9 / 10;
    Dataset train_set;
    train_set.name = "advtrain_mix";
    train_set.num_classes = clean.num_classes;
    train_set.class_counts.assign(static_cast<std::size_t>(clean.num_classes), 0);
    std::vector<TokenSequence> validation;
    for (std::size_t i = 0; i < mix_order.size(); ++i) {
        TokenSequence& s = mixed[mix_order[i]];
        if (i < train_count) {
            ++train_set.class_counts[static_cast<std::size_t>(s.label)];
            train_set.samples.push_back(std::move(s));
        } else {
            validation.push_back(std::move(s));
        }
    }

    AdvTrainResult result{model, {}, 0.0, mixed.size()};
    result.loss_history = train(result.model, train_set, cfg);

    std::size_t correct = 0;
    for (const auto& s : validation) {
        if (predicted_class(result.model, s) == s.label) {
            ++correct;
        }
    }
    result.validation_accuracy =
        validation.empty() ? 0.0
                           : static_cast<double>(correct) / static_cast<double>(validation.size());
    return result;
}

void write_attacks_jsonl(const std::string& path, const std::vector<AttackResult>& results) {
    auto out = detail::open_out(path, "write_attacks_jsonl");
    for (const auto& r : results) {
        nlohmann::ordered_json obj;
        obj["original_text"] = r.original.text();
        obj["perturbed_text"] = r.perturbed.text();
        obj["label"] = r.original.label;
        obj["success"] = r.success;
        obj["attack_kind"] = to_string(r.attack_kind);
        obj["perturbed_fraction"] = r.perturbed_fraction;
        out << obj.dump() << '\n';
    }
}

std::vector<AttackRecord> read_attacks_jsonl(const std::string& path) {
    auto in = detail::open_in(path, "read_attacks_jsonl");
    std::vector<AttackRecord> records;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("read_attacks_jsonl: line " + std::to_string(line_number) + ": " +
                        e.what());
        }
        AttackRecord rec;
        rec.original_text = obj.at("original_text").get<std::string>();
        rec.perturbed_text = obj.at("perturbed_text").get<std::string>();
        rec.label = obj.at("label").get<int>();
        rec.success = obj.at("success").get<bool>();
        rec.attack_kind = attack_kind_from_string(obj.at("attack_kind").get<std::string>());
        rec.perturbed_fraction = obj.at("perturbed_fraction").get<double>();
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace masklab
