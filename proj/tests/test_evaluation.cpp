#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fcl/errors.hpp"
#include "fcl/evaluation.hpp"

using namespace fcl;

namespace {

Vec64 random_unit(std::size_t dim, Rng& rng) {
    Vec64 v(dim);
    for (double& x : v) {
        x = rng.normal();
    }
    return l2_normalize(v);
}

// Gram-Schmidt on a random Gaussian matrix: a random rotation for the
// alignment invariance check.
Mat64 random_orthogonal(std::size_t dim, Rng& rng) {
    std::vector<Vec64> basis;
    while (basis.size() < dim) {
        Vec64 v(dim);
        for (double& x : v) {
            x = rng.normal();
        }
        for (const Vec64& b : basis) {
            const double proj = dot(v, b);
            for (std::size_t i = 0; i < dim; ++i) {
                v[i] -= proj * b[i];
            }
        }
        if (norm(v) > 1e-6) {
            basis.push_back(l2_normalize(v));
        }
    }
    Mat64 q(dim, dim);
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            q(r, c) = basis[r][c];
        }
    }
    return q;
}

SyntheticConfig probe_data_config() {
    SyntheticConfig cfg;
    cfg.num_clients = 2;
    cfg.volumes_per_client = 10;
    cfg.slices_per_volume = 8;
    cfg.partitions = 4;
    cfg.image_side = 6;
    cfg.seed = 17;
    return cfg;
}

}  // namespace

TEST_CASE("probe scores separable embeddings perfectly") {
    // One-hot by class, tiny jitter: linearly separable.
    Rng rng(3);
    std::vector<Vec64> xs;
    std::vector<std::uint16_t> ys;
    for (int i = 0; i < 80; ++i) {
        const auto label = static_cast<std::uint16_t>(i % 4);
        Vec64 v(4, 0.0);
        v[label] = 1.0;
        v[(label + 1) % 4] = 0.01 * rng.uniform();
        xs.push_back(l2_normalize(v));
        ys.push_back(label);
    }
    const double acc = train_and_score_probe(xs, ys, xs, ys, 4, 100, 0.5);
    CHECK(acc == doctest::Approx(1.0));
}

TEST_CASE("probe on random embeddings sits at chance level") {
    Rng rng(12345);
    std::vector<Vec64> train_x;
    std::vector<std::uint16_t> train_y;
    std::vector<Vec64> val_x;
    std::vector<std::uint16_t> val_y;
    for (int i = 0; i < 64; ++i) {
        train_x.push_back(random_unit(32, rng));
        train_y.push_back(static_cast<std::uint16_t>(i % 4));
    }
    for (int i = 0; i < 1024; ++i) {
        val_x.push_back(random_unit(32, rng));
        val_y.push_back(static_cast<std::uint16_t>(i % 4));
    }
    const double acc = train_and_score_probe(train_x, train_y, val_x, val_y, 4, 100, 0.5);
    CHECK(std::abs(acc - 0.25) < 0.05);
}

TEST_CASE("probe rejects a single-class training set") {
    std::vector<Vec64> xs = {{1.0, 0.0}, {0.9, 0.1}};
    std::vector<std::uint16_t> ys = {0, 0};
    CHECK_THROWS_AS(train_and_score_probe(xs, ys, xs, ys, 2, 10, 0.5), ContractError);
}

TEST_CASE("probe with permuted labels lands within 3 sigma of chance") {
    const SyntheticConfig data_cfg = probe_data_config();
    const auto dataset = generate_dataset(data_cfg);
    const PartitionSpec spec = data_cfg.partition_spec();
    const EncoderDims dims{data_cfg.input_dim(), 12, 8};
    Rng init_rng(4);
    const EncoderParams encoder = EncoderParams::init(dims, init_rng);

    // Embed everything, then assign labels by a seeded permutation of the
    // true ones, breaking any label-feature association.
    std::vector<Vec64> xs;
    std::vector<std::uint16_t> ys;
    for (const auto& shard : dataset) {
        for (const Volume& volume : shard) {
            for (std::size_t i = 0; i < volume.slices.size(); ++i) {
                xs.push_back(forward(encoder, volume.slices[i]).embedding);
                ys.push_back(spec.partition_of(i));
            }
        }
    }
    Rng shuffle_rng(99);
    std::vector<std::uint16_t> permuted = ys;
    for (std::size_t i = permuted.size(); i > 1; --i) {
        std::swap(permuted[i - 1], permuted[shuffle_rng.uniform_index(i)]);
    }

    const std::size_t split = xs.size() / 2;
    const std::vector<Vec64> train_x(xs.begin(), xs.begin() + split);
    const std::vector<std::uint16_t> train_y(permuted.begin(), permuted.begin() + split);
    const std::vector<Vec64> val_x(xs.begin() + split, xs.end());
    const std::vector<std::uint16_t> val_y(permuted.begin() + split, permuted.end());

    const double acc = train_and_score_probe(train_x, train_y, val_x, val_y, spec.partitions,
                                             100, 0.5);
    const double chance = 1.0 / static_cast<double>(spec.partitions);
    const double sigma = std::sqrt(chance * (1.0 - chance) / static_cast<double>(val_x.size()));
    CHECK(std::abs(acc - chance) <= 3.0 * sigma);
}

TEST_CASE("fold splits partition volumes disjointly and never leak") {
    ProbeConfig cfg;
    cfg.folds = 5;
    cfg.labeled_volumes = 3;
    const std::size_t volumes = 10;

    std::set<std::size_t> all_validation;
    for (std::size_t fold = 0; fold < cfg.folds; ++fold) {
        const FoldSplit split = probe_fold_split(volumes, cfg, 7, fold, 0);
        CHECK(split.labeled.size() == cfg.labeled_volumes);
        for (std::size_t v : split.validation) {
            CHECK(all_validation.insert(v).second);  // disjoint across folds
        }
        for (std::size_t labeled : split.labeled) {
            CHECK(std::find(split.validation.begin(), split.validation.end(), labeled) ==
                  split.validation.end());
        }
    }
    CHECK(all_validation.size() == volumes);  // every volume validates exactly once

    // Deterministic given the seed.
    const FoldSplit a = probe_fold_split(volumes, cfg, 7, 2, 1);
    const FoldSplit b = probe_fold_split(volumes, cfg, 7, 2, 1);
    CHECK(a.labeled == b.labeled);
    CHECK(a.validation == b.validation);
}

TEST_CASE("linear_probe leaves the encoder untouched") {
    const SyntheticConfig data_cfg = probe_data_config();
    const auto dataset = generate_dataset(data_cfg);
    const EncoderDims dims{data_cfg.input_dim(), 12, 8};
    Rng init_rng(8);
    const EncoderParams encoder = EncoderParams::init(dims, init_rng);
    const EncoderParams before = encoder;

    ProbeConfig cfg;
    cfg.labeled_volumes = 2;
    cfg.folds = 5;
    cfg.epochs = 20;
    const double acc = linear_probe(encoder, dataset, data_cfg.partition_spec(), cfg, 3);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(encoder == before);

    ProbeConfig finetune = cfg;
    finetune.finetune_encoder = true;
    finetune.epochs = 5;
    const double ft_acc = linear_probe(encoder, dataset, data_cfg.partition_spec(), finetune, 3);
    CHECK(ft_acc >= 0.0);
    CHECK(ft_acc <= 1.0);
    CHECK(encoder == before);  // fine-tuning runs on an internal copy
}

TEST_CASE("alignment metric closed forms") {
    SUBCASE("all features identical gives zero") {
        const Vec64 f = l2_normalize({1.0, 2.0, 3.0});
        FeatureGroups groups(3, std::vector<std::vector<Vec64>>(2, {f, f}));
        CHECK(alignment_metric(groups) == doctest::Approx(0.0));
    }

    SUBCASE("one-hot centroids by partition give one") {
        FeatureGroups groups(2, std::vector<std::vector<Vec64>>(3));
        for (std::size_t c = 0; c < 2; ++c) {
            for (std::size_t s = 0; s < 3; ++s) {
                Vec64 onehot(3, 0.0);
                onehot[s] = 1.0;
                groups[c][s] = {onehot, onehot};
            }
        }
        CHECK(alignment_metric(groups) == doctest::Approx(1.0));
    }

    SUBCASE("requires two clients and two populated partitions") {
        const Vec64 f = {1.0, 0.0};
        CHECK_THROWS_AS(alignment_metric(FeatureGroups(1)), ContractError);
        FeatureGroups lopsided(2, std::vector<std::vector<Vec64>>(2));
        lopsided[0][0] = {f};
        lopsided[1][0] = {f};
        CHECK_THROWS_AS(alignment_metric(lopsided), ContractError);
    }

    SUBCASE("empty cells are skipped, not fatal") {
        const Vec64 a = {1.0, 0.0};
        const Vec64 b = {0.0, 1.0};
        FeatureGroups groups(2, std::vector<std::vector<Vec64>>(3));
        groups[0][0] = {a};
        groups[0][1] = {b};
        groups[1][0] = {a};
        groups[1][1] = {b};
        // partition 2 stays empty on both clients
        CHECK(alignment_metric(groups) == doctest::Approx(1.0));
    }
}

TEST_CASE("alignment metric is rotation invariant") {
    Rng rng(27);
    const std::size_t dim = 6;
    FeatureGroups groups(3, std::vector<std::vector<Vec64>>(4));
    for (auto& client : groups) {
        for (auto& cell : client) {
            for (int i = 0; i < 5; ++i) {
                cell.push_back(random_unit(dim, rng));
            }
        }
    }
    const double base = alignment_metric(groups);

    const Mat64 q = random_orthogonal(dim, rng);
    FeatureGroups rotated = groups;
    for (auto& client : rotated) {
        for (auto& cell : client) {
            for (Vec64& f : cell) {
                f = matvec(q, f);
            }
        }
    }
    CHECK(std::abs(alignment_metric(rotated) - base) < 1e-9);
}

TEST_CASE("evaluate_encoder emits the full grid and is reproducible") {
    const SyntheticConfig data_cfg = probe_data_config();
    const EncoderDims dims{data_cfg.input_dim(), 12, 8};
    Rng init_rng(5);
    const EncoderParams encoder = EncoderParams::init(dims, init_rng);

    ProbeConfig cfg;
    cfg.folds = 2;
    cfg.epochs = 10;
    const std::vector<std::size_t> budgets = {1, 2};
    const std::vector<std::uint64_t> seeds = {11, 12};

    const auto rows = evaluate_encoder(encoder, data_cfg, cfg, budgets, seeds, "frozen");
    CHECK(rows.size() == budgets.size() * seeds.size() * cfg.folds);
    for (const EvalReportRow& row : rows) {
        CHECK(row.arm == "frozen");
        CHECK(row.probe_accuracy >= 0.0);
        CHECK(row.probe_accuracy <= 1.0);
    }

    const auto again = evaluate_encoder(encoder, data_cfg, cfg, budgets, seeds, "frozen");
    REQUIRE(again.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].probe_accuracy == again[i].probe_accuracy);
        CHECK(rows[i].alignment == again[i].alignment);
    }

    EncoderParams wrong = EncoderParams::zeros({dims.input + 1, 4, 4});
    CHECK_THROWS_AS(evaluate_encoder(wrong, data_cfg, cfg, budgets, seeds, "x"), DimensionError);
}
