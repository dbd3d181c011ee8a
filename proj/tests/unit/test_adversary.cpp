#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <doctest.h>

#include "masklab/adversary.hpp"
#include "masklab/attribution.hpp"
#include "masklab/corpus.hpp"
#include "masklab/error.hpp"
#include "masklab/masking.hpp"
#include "masklab/model.hpp"
#include "masklab/rng.hpp"
#include "support.hpp"

using namespace masklab;
using namespace masklab::testing;

namespace {

struct SentimentFixture {
    GeneratedData gd = generate_dataset(GeneratorSpec::balanced(200, 12, 3));
    TinyTextClassifier model{gd.vocab.size(), 16, 32, 2, stage_seed(3, "model")};

    SentimentFixture() {
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.seed = stage_seed(3, "train");
        train(model, gd.dataset, cfg);
    }
};

const SentimentFixture& sentiment() {
    static const SentimentFixture fixture;
    return fixture;
}

TokenSequence seq(std::vector<int> ids) {
    TokenSequence s;
    s.ids = std::move(ids);
    for (int id : s.ids) {
        s.raw.push_back("t" + std::to_string(id));
    }
    s.maskable.assign(s.ids.size(), true);
    return s;
}

LambdaModel flip_after(int threshold) {
    return LambdaModel(2, [threshold](const TokenSequence& s) {
        return count_unks(s) >= threshold ? Vec{0.1, 0.9} : Vec{0.9, 0.1};
    });
}

int changed_tokens(const AttackResult& r) {
    int changed = 0;
    for (std::size_t i = 0; i < r.original.ids.size(); ++i) {
        changed += r.perturbed.ids[i] != r.original.ids[i];
    }
    return changed;
}

}  // namespace

TEST_CASE("substitution tables store candidates and reject bad entries") {
    SubstitutionTable table;
    CHECK(table.empty());
    table.add(3, {4, 5});
    CHECK_FALSE(table.empty());
    CHECK(table.size() == 1);
    REQUIRE(table.candidates(3) != nullptr);
    CHECK(*table.candidates(3) == std::vector<int>{4, 5});
    CHECK(table.candidates(7) == nullptr);

    CHECK(message_of([&] { table.add(2, {2}); }).find("maps to itself") != std::string::npos);
    CHECK(message_of([&] { table.add(-1, {2}); }).find("negative token id") !=
          std::string::npos);
    CHECK(message_of([&] { table.add(2, {}); }).find("has no candidates") != std::string::npos);
    CHECK(message_of([&] { table.add(2, {-4}); }).find("negative candidate id") !=
          std::string::npos);
}

TEST_CASE("substitution tables round-trip through their text format") {
    TempDir dir;
    const Vocab vocab = generator_vocab();
    SubstitutionTable table;
    table.add(vocab.lookup("good"), {vocab.lookup("bad"), vocab.lookup("awful")});
    table.save(dir.file("subs.tsv"), vocab);
    const auto text = read_file(dir.file("subs.tsv"));
    CHECK(text == "good\tbad,awful\n");

    const auto back = SubstitutionTable::load(dir.file("subs.tsv"), vocab);
    REQUIRE(back.candidates(vocab.lookup("good")) != nullptr);
    CHECK(*back.candidates(vocab.lookup("good")) ==
          std::vector<int>{vocab.lookup("bad"), vocab.lookup("awful")});
    CHECK(back.size() == 1);

    write_file(dir.file("notab.tsv"), "good bad\n");
    CHECK(message_of([&] { SubstitutionTable::load(dir.file("notab.tsv"), vocab); })
              .find("no tab separator") != std::string::npos);
    write_file(dir.file("unktok.tsv"), "qqqq\tbad\n");
    CHECK(message_of([&] { SubstitutionTable::load(dir.file("unktok.tsv"), vocab); })
              .find("\"qqqq\" not in vocabulary") != std::string::npos);
    write_file(dir.file("unkcand.tsv"), "good\tqqqq\n");
    CHECK(message_of([&] { SubstitutionTable::load(dir.file("unkcand.tsv"), vocab); })
              .find("candidate \"qqqq\" not in vocabulary") != std::string::npos);
}

TEST_CASE("keyword swaps map between opposing word groups") {
    const Vocab vocab = generator_vocab();
    const auto table = SubstitutionTable::keyword_swaps(vocab);
    CHECK(table.size() == positive_keywords().size() + negative_keywords().size() +
                              toxicity_triggers().size() + benign_words().size());

    std::vector<int> negative_ids;
    for (const auto& w : negative_keywords()) {
        negative_ids.push_back(vocab.lookup(w));
    }
    REQUIRE(table.candidates(vocab.lookup("good")) != nullptr);
    CHECK(*table.candidates(vocab.lookup("good")) == negative_ids);

    std::vector<int> benign_ids;
    for (const auto& w : benign_words()) {
        benign_ids.push_back(vocab.lookup(w));
    }
    const int trigger = vocab.lookup(toxicity_triggers().front());
    REQUIRE(table.candidates(trigger) != nullptr);
    CHECK(*table.candidates(trigger) == benign_ids);
}

TEST_CASE("saliency masking flips an easily flipped model in one step") {
    const auto m = flip_after(1);
    const auto r = saliency_mask_attack(m, seq({1, 2, 3}), AttributionMethod::occlusion, 1.0);
    CHECK(r.success);
    CHECK(r.queries == 2);
    CHECK(std::fabs(r.perturbed_fraction - 1.0 / 3.0) <= 1e-12);
    CHECK(changed_tokens(r) == 1);
    CHECK(count_unks(r.perturbed) == 1);
    CHECK(r.attack_kind == AttackKind::saliency_mask);
    CHECK(r.original.ids == std::vector<int>{1, 2, 3});
}

TEST_CASE("the masking budget caps an attack that needs more steps") {
    // Flipping needs 3 unks; budget 0.4 of 5 tokens allows ceil(2) = 2.
    const auto m = flip_after(3);
    const auto r =
        saliency_mask_attack(m, seq({1, 2, 3, 4, 5}), AttributionMethod::occlusion, 0.4);
    CHECK_FALSE(r.success);
    CHECK(count_unks(r.perturbed) == 2);
    CHECK(std::fabs(r.perturbed_fraction - 0.4) <= 1e-12);
    CHECK(r.queries == 3);

    const auto r2 =
        saliency_mask_attack(m, seq({1, 2, 3, 4, 5}), AttributionMethod::occlusion, 0.6);
    CHECK(r2.success);
    CHECK(count_unks(r2.perturbed) == 3);
    CHECK(std::fabs(r2.perturbed_fraction - 0.6) <= 1e-12);
}

TEST_CASE("attack budgets outside (0, 1] are rejected") {
    const auto m = flip_after(1);
    const Vocab vocab = generator_vocab();
    SubstitutionTable table;
    table.add(1, {2});
    for (double bad : {0.0, -0.1, 1.5}) {
        CHECK(message_of([&] {
                  saliency_mask_attack(m, seq({1, 2}), AttributionMethod::occlusion, bad);
              }).find("attack budget must be in (0, 1]") != std::string::npos);
        CHECK(message_of([&] {
                  greedy_substitute_attack(m, seq({1, 2}), AttributionMethod::occlusion, table,
                                           bad, vocab);
              }).find("attack budget must be in (0, 1]") != std::string::npos);
        CHECK(message_of([&] {
                  char_noise_attack(m, seq({1, 2}), AttributionMethod::occlusion, bad, 1, vocab);
              }).find("attack budget must be in (0, 1]") != std::string::npos);
    }
}

TEST_CASE("full-budget saliency attacks succeed exactly when masking traces flip") {
    const auto& m = sentiment().model;
    const std::vector<TokenSequence> samples(sentiment().gd.dataset.samples.begin(),
                                             sentiment().gd.dataset.samples.begin() + 100);
    const auto traces = mask_traces(m, samples, AttributionMethod::integrated_gradients);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto r =
            saliency_mask_attack(m, samples[i], AttributionMethod::integrated_gradients, 1.0);
        CHECK(r.success == traces[i].flip_step.has_value());
        if (traces[i].flip_step.has_value()) {
            const double f = static_cast<double>(*traces[i].flip_step) /
                             static_cast<double>(traces[i].maskable_count);
            CHECK(std::fabs(r.perturbed_fraction - f) <= 1e-12);
        }
        if (r.success) {
            CHECK(predicted_class(m, r.perturbed) != predicted_class(m, r.original));
        }
    }
}

TEST_CASE("greedy substitution flips a positive review with one swap") {
    const auto& gd = sentiment().gd;
    const auto& m = sentiment().model;
    const auto s = tokenize("beautiful film", gd.vocab);
    REQUIRE(predicted_class(m, s) == 1);

    SubstitutionTable table;
    table.add(gd.vocab.lookup("beautiful"), {gd.vocab.lookup("dreadful")});
    const auto r = greedy_substitute_attack(m, s, AttributionMethod::integrated_gradients, table,
                                            1.0, gd.vocab);
    CHECK(r.success);
    CHECK(changed_tokens(r) == 1);
    CHECK(r.queries == 2);
    CHECK(r.perturbed.raw[0] == "dreadful");
    CHECK(r.perturbed.raw[1] == "film");
    CHECK(r.perturbed.ids[0] == gd.vocab.lookup("dreadful"));
    CHECK(r.perturbed.size() == s.size());
    CHECK(std::fabs(r.perturbed_fraction - 0.5) <= 1e-12);
    CHECK(r.attack_kind == AttackKind::greedy_substitute);
}

TEST_CASE("greedy substitution leaves samples without candidates untouched") {
    const auto& gd = sentiment().gd;
    const auto& m = sentiment().model;
    const auto s = tokenize("beautiful film", gd.vocab);
    SubstitutionTable table;
    table.add(63, {5});  // a token the sample does not contain
    const auto r = greedy_substitute_attack(m, s, AttributionMethod::integrated_gradients, table,
                                            1.0, gd.vocab);
    CHECK_FALSE(r.success);
    CHECK(r.queries == 1);
    CHECK(changed_tokens(r) == 0);
    CHECK(r.perturbed_fraction == 0.0);
}

TEST_CASE("greedy substitution skips candidates that do not help") {
    // P(class 0) rises from 0.9 to 0.95 when token 7 appears, so the only
    // candidate makes things worse for the attacker and is rejected.
    const LambdaModel m(2, [](const TokenSequence& s) {
        for (int id : s.ids) {
            if (id == 7) {
                return Vec{0.95, 0.05};
            }
        }
        return Vec{0.9, 0.1};
    });
    const Vocab vocab = generator_vocab();
    SubstitutionTable table;
    table.add(5, {7});
    const auto r =
        greedy_substitute_attack(m, seq({5, 2}), AttributionMethod::occlusion, table, 1.0, vocab);
    CHECK_FALSE(r.success);
    CHECK(changed_tokens(r) == 0);
    CHECK(r.perturbed_fraction == 0.0);
    CHECK(r.queries == 2);
}

TEST_CASE("greedy substitution stops accepting at the budget cap") {
    // Every occurrence of token 9 lowers P(class 0) a little but never below
    // one half, so the attack keeps substituting until the cap.
    const LambdaModel m(2, [](const TokenSequence& s) {
        int nines = 0;
        for (int id : s.ids) {
            nines += id == 9;
        }
        const double p = 0.9 - 0.005 * nines;
        return Vec{p, 1.0 - p};
    });
    const Vocab vocab = generator_vocab();
    SubstitutionTable table;
    for (int t : {1, 2, 3, 4}) {
        table.add(t, {9});
    }
    const auto r = greedy_substitute_attack(m, seq({1, 2, 3, 4}), AttributionMethod::occlusion,
                                            table, 0.5, vocab);
    CHECK_FALSE(r.success);
    CHECK(changed_tokens(r) == 2);
    CHECK(std::fabs(r.perturbed_fraction - 0.5) <= 1e-12);
    CHECK(r.queries == 3);

    SubstitutionTable empty_table;
    CHECK(message_of([&] {
              greedy_substitute_attack(m, seq({1, 2}), AttributionMethod::occlusion, empty_table,
                                       1.0, vocab);
          }).find("empty substitution table") != std::string::npos);
}

TEST_CASE("character noise transposes adjacent letters and lands on unk") {
    const Vocab vocab({"[UNK]", "aa", "ab", "b"});
    const LambdaModel m(2, [](const TokenSequence&) { return Vec{0.8, 0.2}; });
    TokenSequence s;
    s.ids = {1, 2, 3};
    s.raw = {"aa", "ab", "b"};
    s.maskable = {true, true, true};
    const auto r = char_noise_attack(m, s, AttributionMethod::occlusion, 1.0, 5, vocab);
    CHECK_FALSE(r.success);
    // "aa" is uniform and "b" is a single character: both are skipped without
    // consuming budget; only "ab" is transposed.
    CHECK(r.perturbed.raw[0] == "aa");
    CHECK(r.perturbed.raw[1] == "ba");
    CHECK(r.perturbed.raw[2] == "b");
    CHECK(r.perturbed.ids == std::vector<int>{1, Vocab::kUnkId, 3});
    CHECK(std::fabs(r.perturbed_fraction - 1.0 / 3.0) <= 1e-12);
    CHECK(r.queries == 2);
    CHECK(r.attack_kind == AttackKind::char_noise);
}

TEST_CASE("character noise performs exactly one adjacent swap per changed word") {
    const auto& gd = sentiment().gd;
    const auto& m = sentiment().model;
    const auto s = tokenize("good film the plot", gd.vocab);
    const auto r =
        char_noise_attack(m, s, AttributionMethod::integrated_gradients, 1.0, 11, gd.vocab);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (r.perturbed.raw[i] == s.raw[i]) {
            continue;
        }
        const auto& orig = s.raw[i];
        const auto& noisy = r.perturbed.raw[i];
        REQUIRE(noisy.size() == orig.size());
        std::vector<std::size_t> diffs;
        for (std::size_t c = 0; c < orig.size(); ++c) {
            if (orig[c] != noisy[c]) {
                diffs.push_back(c);
            }
        }
        REQUIRE(diffs.size() == 2);
        CHECK(diffs[1] == diffs[0] + 1);
        CHECK(noisy[diffs[0]] == orig[diffs[1]]);
        CHECK(noisy[diffs[1]] == orig[diffs[0]]);
        CHECK(r.perturbed.ids[i] == Vocab::kUnkId);
    }

    const auto again =
        char_noise_attack(m, s, AttributionMethod::integrated_gradients, 1.0, 11, gd.vocab);
    CHECK(again.perturbed.raw == r.perturbed.raw);
    CHECK(again.perturbed.ids == r.perturbed.ids);
    CHECK(again.queries == r.queries);
}

TEST_CASE("character noise mirrors saliency masking under a closed vocabulary") {
    // Every word in the sample can be transposed into an out-of-vocabulary
    // string, so both attacks walk the same ranking and produce the same
    // unk pattern.
    const auto& gd = sentiment().gd;
    const auto& m = sentiment().model;
    const auto s = tokenize("good film the plot", gd.vocab);
    const auto noise =
        char_noise_attack(m, s, AttributionMethod::integrated_gradients, 1.0, 3, gd.vocab);
    const auto mask = saliency_mask_attack(m, s, AttributionMethod::integrated_gradients, 1.0);
    CHECK(noise.success == mask.success);
    CHECK(noise.perturbed.ids == mask.perturbed.ids);
    CHECK(noise.perturbed_fraction == mask.perturbed_fraction);
    CHECK(noise.queries == mask.queries);
}

TEST_CASE("adversarial training improves accuracy on held-out attacked samples") {
    const auto& gd = sentiment().gd;
    const auto& m = sentiment().model;
    std::vector<AttackResult> successes;
    for (const auto& sample : gd.dataset.samples) {
        auto r = saliency_mask_attack(m, sample, AttributionMethod::integrated_gradients, 0.5);
        if (r.success) {
            successes.push_back(std::move(r));
        }
    }
    CHECK(successes.size() == 179);

    std::vector<AttackResult> used;
    std::vector<TokenSequence> held;
    for (std::size_t i = 0; i < successes.size(); ++i) {
        if (i % 2 == 0) {
            used.push_back(successes[i]);
        } else {
            TokenSequence h = successes[i].perturbed;
            h.label = successes[i].original.label;
            held.push_back(std::move(h));
        }
    }
    const auto acc_on = [&held](const TinyTextClassifier& model) {
        std::size_t correct = 0;
        for (const auto& s : held) {
            correct += predicted_class(model, s) == s.label;
        }
        return static_cast<double>(correct) / static_cast<double>(held.size());
    };

    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.seed = stage_seed(3, "advtrain");
    const auto result = adversarial_train(m, gd.dataset, used, cfg);
    const double pre = acc_on(m);
    const double post = acc_on(result.model);
    MESSAGE("held-out adversarial accuracy ", pre, " -> ", post, ", validation ",
            result.validation_accuracy);
    CHECK(result.mixed_size == 2 * std::min<std::size_t>(gd.dataset.samples.size(), used.size()));
    CHECK(result.loss_history.size() == 40);
    CHECK(post > pre);
    CHECK(post >= 0.2);
    CHECK(result.validation_accuracy >= 0.6);
    CHECK(result.validation_accuracy <= 1.0);
}

TEST_CASE("adversarial training with zero epochs keeps the model unchanged") {
    auto labeled = [](std::vector<int> ids, int label) {
        TokenSequence s = seq(std::move(ids));
        s.label = label;
        return s;
    };
    const auto data = make_dataset({labeled({1, 2, 3}, 0), labeled({2, 3, 4}, 1),
                                    labeled({3, 4, 5}, 0), labeled({4, 5, 6}, 1)},
                                   2, "tiny");
    TinyTextClassifier model(8, 4, 6, 2, 42);

    AttackResult success;
    success.original = data.samples[0];
    success.perturbed = data.samples[0];
    success.perturbed.ids[0] = Vocab::kUnkId;
    success.success = true;
    AttackResult failure;
    failure.original = data.samples[1];
    failure.perturbed = data.samples[1];
    failure.success = false;

    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 9;
    const auto result = adversarial_train(model, data, {success, failure}, cfg);
    CHECK(result.mixed_size == 2);
    CHECK(result.loss_history.empty());
    for (const auto& s : data.samples) {
        CHECK(model.predict(s) == result.model.predict(s));
    }

    CHECK(message_of([&] { adversarial_train(model, data, {}, cfg); }).find("no attacks given") !=
          std::string::npos);
    CHECK(message_of([&] {
              adversarial_train(model, data, {failure}, cfg);
          }).find("zero successful attacks") != std::string::npos);
    CHECK(message_of([&] {
              adversarial_train(model, Dataset{}, {success}, cfg);
          }).find("empty clean dataset") != std::string::npos);
}

TEST_CASE("attack results round-trip through JSONL") {
    TempDir dir;
    const Vocab vocab = generator_vocab();
    AttackResult a;
    a.original = tokenize("good film", vocab);
    a.original.label = 1;
    a.perturbed = a.original;
    a.perturbed.ids[0] = vocab.lookup("bad");
    a.perturbed.raw[0] = "bad";
    a.success = true;
    a.attack_kind = AttackKind::greedy_substitute;
    a.perturbed_fraction = 0.5;

    AttackResult b;
    b.original = tokenize("dull plot", vocab);
    b.original.label = 0;
    b.perturbed = b.original;
    b.success = false;
    b.attack_kind = AttackKind::char_noise;
    b.perturbed_fraction = 0.0;

    write_attacks_jsonl(dir.file("attacks.jsonl"), {a, b});
    const auto records = read_attacks_jsonl(dir.file("attacks.jsonl"));
    REQUIRE(records.size() == 2);
    CHECK(records[0].original_text == "good film");
    CHECK(records[0].perturbed_text == "bad film");
    CHECK(records[0].label == 1);
    CHECK(records[0].success);
    CHECK(records[0].attack_kind == AttackKind::greedy_substitute);
    CHECK(records[0].perturbed_fraction == 0.5);
    CHECK(records[1].original_text == "dull plot");
    CHECK(records[1].perturbed_text == "dull plot");
    CHECK_FALSE(records[1].success);
    CHECK(records[1].attack_kind == AttackKind::char_noise);

    write_file(dir.file("bad.jsonl"),
               "{\"original_text\":\"a\",\"perturbed_text\":\"b\",\"label\":0,"
               "\"success\":false,\"attack_kind\":\"char_noise\",\"perturbed_fraction\":0.0}\n"
               "not json\n");
    CHECK(message_of([&] { read_attacks_jsonl(dir.file("bad.jsonl")); }).find("line 2") !=
          std::string::npos);
}

TEST_CASE("attack kind names round-trip") {
    CHECK(to_string(AttackKind::saliency_mask) == "saliency_mask");
    CHECK(to_string(AttackKind::greedy_substitute) == "greedy_substitute");
    CHECK(to_string(AttackKind::char_noise) == "char_noise");
    CHECK(attack_kind_from_string("saliency_mask") == AttackKind::saliency_mask);
    CHECK(attack_kind_from_string("greedy_substitute") == AttackKind::greedy_substitute);
    CHECK(attack_kind_from_string("char_noise") == AttackKind::char_noise);
    CHECK(message_of<ConfigError>([] { attack_kind_from_string("gradient_flood"); })
              .find("unknown attack kind") != std::string::npos);
}
