#include "masklab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "masklab/error.hpp"
#include "masklab/rng.hpp"

namespace masklab {

namespace {

bool has_whitespace(std::string_view s) {
    return std::any_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

Vocab::Vocab() {
    tokens_.emplace_back(kUnkToken);
    index_.emplace(std::string(kUnkToken), kUnkId);
}

Vocab::Vocab(const std::vector<std::string>& tokens) {
    if (tokens.empty() || tokens.front() != kUnkToken) {
        throw Error("vocab: first token must be \"[UNK]\"");
    }
    tokens_.reserve(tokens.size());
    for (const auto& t : tokens) {
        validate_new_token(t);
        if (index_.count(t) != 0) {
            throw Error("vocab: duplicate token \"" + t + "\"");
        }
        index_.emplace(t, static_cast<int>(tokens_.size()));
        tokens_.push_back(t);
    }
}

void Vocab::validate_new_token(const std::string& token) const {
    if (token.empty()) {
        throw Error("vocab: empty token");
    }
    if (has_whitespace(token)) {
        throw Error("vocab: token contains whitespace: \"" + token + "\"");
    }
}

int Vocab::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) {
        return it->second;
    }
    validate_new_token(token);
    const int id = static_cast<int>(tokens_.size());
    index_.emplace(token, id);
    tokens_.push_back(token);
    return id;
}

int Vocab::lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const {
    return index_.count(std::string(token)) != 0;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) {
        throw Error("vocab: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("vocab: cannot open \"" + path + "\" for writing");
    }
    for (const auto& t : tokens_) {
        out << t << '\n';
    }
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("vocab: cannot open \"" + path + "\"");
    }
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        tokens.push_back(line);
    }
    return Vocab(tokens);
}

std::size_t TokenSequence::maskable_count() const {
    return static_cast<std::size_t>(std::count(maskable.begin(), maskable.end(), true));
}

std::string TokenSequence::text() const {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += raw[i];
    }
    return out;
}

std::string_view to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::balanced_sentiment:
            return "balanced_sentiment";
        case GeneratorKind::imbalanced_toxicity:
            return "imbalanced_toxicity";
    }
    throw Error("unknown generator kind");
}

GeneratorKind generator_kind_from_string(std::string_view s) {
    if (s == "balanced_sentiment") {
        return GeneratorKind::balanced_sentiment;
    }
    if (s == "imbalanced_toxicity") {
        return GeneratorKind::imbalanced_toxicity;
    }
    throw ConfigError("unknown generator kind \"" + std::string(s) + "\"");
}

GeneratorSpec GeneratorSpec::balanced(int num_samples, int mean_length, std::uint64_t seed) {
    return GeneratorSpec{GeneratorKind::balanced_sentiment, num_samples, mean_length, 0.5, seed};
}

GeneratorSpec GeneratorSpec::toxicity(int num_samples, int mean_length, std::uint64_t seed,
                                      double minority_fraction) {
    return GeneratorSpec{GeneratorKind::imbalanced_toxicity, num_samples, mean_length,
                         minority_fraction, seed};
}

TokenSequence tokenize(std::string_view text, const Vocab& vocab) {
    TokenSequence seq;
    std::istringstream stream{lowercase(text)};
    std::string tok;
    while (stream >> tok) {
        seq.ids.push_back(vocab.lookup(tok));
        seq.raw.push_back(tok);
        seq.maskable.push_back(true);
    }
    return seq;
}

const std::vector<std::string>& positive_keywords() {
    static const std::vector<std::string> words = {
        "good",   "great",    "beautiful", "wonderful", "excellent",
        "superb", "charming", "moving",    "brilliant", "delightful"};
    return words;
}

const std::vector<std::string>& negative_keywords() {
    static const std::vector<std::string> words = {
        "bad",  "awful",  "dreadful", "terrible", "boring",
        "dull", "clumsy", "dismal",   "horrid",   "tedious"};
    return words;
}

const std::vector<std::string>& neutral_fillers() {
    static const std::vector<std::string> words = {
        "the",   "a",     "of",    "and",  "with", "film",  "movie",
        "plot",  "scene", "story", "cast", "tone", "music", "pace",
        "frame", "shot",  "actor", "line", "set",  "light"};
    return words;
}

const std::vector<std::string>& toxicity_triggers() {
    static const std::vector<std::string> words = {
        "idiot", "stupid", "trash", "moron", "loser", "garbage", "clown", "fool"};
    return words;
}

const std::vector<std::string>& benign_words() {
    static const std::vector<std::string> words = {
        "thanks", "please", "friend", "agree", "point",  "article", "comment", "edit",
        "page",   "talk",   "source", "cite",  "polite", "fair",    "note",    "reply"};
    return words;
}

Vocab generator_vocab() {
    std::vector<std::string> tokens;
    tokens.emplace_back(Vocab::kUnkToken);
    for (const auto* list : {&positive_keywords(), &negative_keywords(), &neutral_fillers(),
                             &toxicity_triggers(), &benign_words()}) {
        tokens.insert(tokens.end(), list->begin(), list->end());
    }
    return Vocab(tokens);
}

namespace {

void validate_spec(const GeneratorSpec& spec) {
    if (spec.num_samples < 10) {
        throw ConfigError("generator: num_samples must be >= 10, got " +
                          std::to_string(spec.num_samples));
    }
    if (spec.mean_length < 3) {
        throw ConfigError("generator: mean_length must be >= 3, got " +
                          std::to_string(spec.mean_length));
    }
    if (!(spec.minority_fraction > 0.0 && spec.minority_fraction <= 1.0)) {
        throw ConfigError("generator: minority_fraction must be in (0, 1]");
    }
    if (spec.kind == GeneratorKind::balanced_sentiment && spec.minority_fraction != 0.5) {
        throw ConfigError("generator: minority_fraction is fixed at 0.5 for balanced_sentiment");
    }
}

int sample_length(Rng& rng, int mean_length) {
    const int lo = std::max(3, mean_length - 3);
    const int hi = mean_length + (mean_length - lo);  // symmetric around the mean
    return lo + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(hi - lo + 1)));
}

TokenSequence make_sequence(const std::vector<std::string>& tokens, const Vocab& vocab,
                            int label) {
    TokenSequence seq;
    seq.label = label;
    for (const auto& t : tokens) {
        seq.ids.push_back(vocab.lookup(t));
        seq.raw.push_back(t);
        seq.maskable.push_back(true);
    }
    return seq;
}

const std::string& pick(Rng& rng, const std::vector<std::string>& list) {
    return list[rng.bounded(list.size())];
}

TokenSequence generate_sentiment_sample(Rng& rng, const Vocab& vocab, int target_class,
                                        int mean_length) {
    const auto& own = target_class == 1 ? positive_keywords() : negative_keywords();
    const auto& other = target_class == 1 ? negative_keywords() : positive_keywords();

    constexpr int kMaxAttempts = 10000;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const int length = sample_length(rng, mean_length);
        std::vector<std::string> tokens;
        tokens.reserve(static_cast<std::size_t>(length));
        int own_count = 0;
        int other_count = 0;
        for (int i = 0; i < length; ++i) {
            const double r = rng.next_double();
            if (r < 0.30) {
                tokens.push_back(pick(rng, own));
                ++own_count;
            } else if (r < 0.40) {
                tokens.push_back(pick(rng, other));
                ++other_count;
            } else {
                tokens.push_back(pick(rng, neutral_fillers()));
            }
        }
        // Ties are resolved by regeneration so labels stay noiseless.
        if (own_count > other_count) {
            return make_sequence(tokens, vocab, target_class);
        }
    }
    throw Error("generator: failed to produce a tie-free sample");
}

TokenSequence generate_toxicity_sample(Rng& rng, const Vocab& vocab, bool minority,
                                       int mean_length) {
    const int length = sample_length(rng, mean_length);
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(length));
    int trigger_count = 0;
    for (int i = 0; i < length; ++i) {
        const double r = rng.next_double();
        if (minority && r < 0.25) {
            tokens.push_back(pick(rng, toxicity_triggers()));
            ++trigger_count;
        } else if (r < 0.60) {
            tokens.push_back(pick(rng, neutral_fillers()));
        } else {
            tokens.push_back(pick(rng, benign_words()));
        }
    }
    if (minority && trigger_count == 0) {
        tokens[rng.bounded(tokens.size())] = pick(rng, toxicity_triggers());
    }
    return make_sequence(tokens, vocab, minority ? 1 : 0);
}

std::vector<std::size_t> class_counts_of(const std::vector<TokenSequence>& samples,
                                         int num_classes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (const auto& s : samples) {
        ++counts[static_cast<std::size_t>(s.label)];
    }
    return counts;
}

}  // namespace

GeneratedData generate_dataset(const GeneratorSpec& spec) {
    validate_spec(spec);
    Vocab vocab = generator_vocab();
    Rng rng(mix64(spec.seed));

    Dataset data;
    data.num_classes = 2;
    data.name = std::string(to_string(spec.kind));
    data.samples.reserve(static_cast<std::size_t>(spec.num_samples));

    if (spec.kind == GeneratorKind::balanced_sentiment) {
        for (int i = 0; i < spec.num_samples; ++i) {
            data.samples.push_back(
                generate_sentiment_sample(rng, vocab, i % 2, spec.mean_length));
        }
    } else {
        const auto minority_count = static_cast<std::size_t>(
            std::llround(spec.minority_fraction * spec.num_samples));
        std::vector<char> is_minority(static_cast<std::size_t>(spec.num_samples), 0);
        std::fill_n(is_minority.begin(), minority_count, 1);
        rng.shuffle(is_minority);
        for (int i = 0; i < spec.num_samples; ++i) {
            data.samples.push_back(generate_toxicity_sample(
                rng, vocab, is_minority[static_cast<std::size_t>(i)] != 0, spec.mean_length));
        }
    }

    data.class_counts = class_counts_of(data.samples, data.num_classes);
    return GeneratedData{std::move(data), std::move(vocab)};
}

GeneratedData load_jsonl(const std::string& path, const Vocab* vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("load_jsonl: cannot open \"" + path + "\"");
    }

    Vocab built;          // first-appearance order, id 0 = [UNK]
    const bool build = vocab == nullptr;

    Dataset data;
    data.name = path;
    const auto slash = path.find_last_of('/');
    if (slash != std::string::npos) {
        data.name = path.substr(slash + 1);
    }
    const auto dot = data.name.find_last_of('.');
    if (dot != std::string::npos) {
        data.name = data.name.substr(0, dot);
    }

    std::string line;
    int line_number = 0;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("load_jsonl: line " + std::to_string(line_number) +
                        " is not valid JSON: " + e.what());
        }
        if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string() ||
            !obj.contains("label") || !obj["label"].is_number_integer()) {
            throw Error("load_jsonl: line " + std::to_string(line_number) +
                        " must be an object with string \"text\" and integer \"label\"");
        }
        const int label = obj["label"].get<int>();
        if (label < 0) {
            throw Error("load_jsonl: line " + std::to_string(line_number) +
                        " has negative label " + std::to_string(label));
        }

        const std::string text = obj["text"].get<std::string>();
        TokenSequence seq;
        if (build) {
            // Register tokens in first-appearance order, then map.
            std::istringstream stream{lowercase(text)};
            std::string tok;
            while (stream >> tok) {
                built.add(tok);
            }
            seq = tokenize(text, built);
        } else {
            seq = tokenize(text, *vocab);
        }
        seq.label = label;
        max_label = std::max(max_label, label);
        data.samples.push_back(std::move(seq));
    }

    data.num_classes = std::max(2, max_label + 1);
    data.class_counts = class_counts_of(data.samples, data.num_classes);
    if (build) {
        return GeneratedData{std::move(data), std::move(built)};
    }
    return GeneratedData{std::move(data), *vocab};
}

void save_jsonl(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("save_jsonl: cannot open \"" + path + "\" for writing");
    }
    for (const auto& s : data.samples) {
        nlohmann::ordered_json obj;
        obj["text"] = s.text();
        obj["label"] = s.label;
        out << obj.dump() << '\n';
    }
}

}  // namespace masklab
