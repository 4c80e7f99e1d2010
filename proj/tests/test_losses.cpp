#include <cmath>
#include <vector>

#include <doctest.h>

#include "naive_losses.hpp"
#include "unicon/errors.hpp"
#include "unicon/losses.hpp"
#include "unicon/rng.hpp"

using namespace unicon;

namespace {

const double kTaus[] = {0.07, 0.1, 0.5, 1.0};

EmbeddingSet orthonormal_set(std::size_t n, std::size_t dim, bool with_universum) {
    EmbeddingSet e;
    e.anchors = Matrix(n, dim);
    for (std::size_t i = 0; i < n; ++i) e.anchors.at(i, i) = 1.0;
    if (with_universum) {
        e.universum = Matrix(n, dim);
        for (std::size_t i = 0; i < n; ++i) e.universum.at(i, n + i) = 1.0;
    }
    e.labels.assign(n, 0);
    e.pair.resize(n);
    for (std::size_t s = 0; s < n / 2; ++s) {
        e.labels[2 * s] = static_cast<int>(s);
        e.labels[2 * s + 1] = static_cast<int>(s);
        e.pair[2 * s] = 2 * s + 1;
        e.pair[2 * s + 1] = 2 * s;
    }
    return e;
}

}  // namespace

TEST_CASE("loss kind round trips through its name") {
    for (LossKind k : {LossKind::infonce, LossKind::supcon, LossKind::add,
                       LossKind::unicon, LossKind::un_uni, LossKind::supmix}) {
        CHECK(loss_kind_from_string(loss_kind_to_string(k)) == k);
    }
    CHECK_THROWS_AS(loss_kind_from_string("nce"), config_error);
    CHECK(requires_universum(LossKind::unicon));
    CHECK(requires_universum(LossKind::add));
    CHECK(requires_universum(LossKind::un_uni));
    CHECK_FALSE(requires_universum(LossKind::infonce));
    CHECK_FALSE(requires_universum(LossKind::supcon));
    CHECK_FALSE(requires_universum(LossKind::supmix));
}

TEST_CASE("pair losses agree with the naive oracles") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng pick(seed, 3);
        const std::size_t samples = 2 + pick.next_below(7);
        const std::size_t dim = 3 + pick.next_below(14);
        const int classes = 2 + static_cast<int>(pick.next_below(2));
        const double tau = kTaus[seed % 4];
        EmbeddingSet e = naive::random_set(samples, classes, dim, seed, true);
        for (Reduction red : {Reduction::verbatim, Reduction::mean}) {
            LossConfig cfg{tau, red, 1};
            CHECK(std::fabs(loss_value(LossKind::infonce, e, cfg) -
                            naive::infonce(e.anchors, e.pair, tau, red)) < 1e-10);
            CHECK(std::fabs(loss_value(LossKind::supcon, e, cfg) -
                            naive::supcon(e.anchors, e.labels, tau, red)) < 1e-10);
            CHECK(std::fabs(loss_value(LossKind::add, e, cfg) -
                            naive::add(e.anchors, e.universum, e.labels, tau, red)) <
                  1e-10);
            CHECK(std::fabs(loss_value(LossKind::unicon, e, cfg) -
                            naive::unicon_loss(e.anchors, e.universum, e.labels, tau,
                                               red)) < 1e-10);
            CHECK(std::fabs(loss_value(LossKind::un_uni, e, cfg) -
                            naive::un_uni(e.anchors, e.universum, e.pair, tau, red)) <
                  1e-10);
        }
    }
}

TEST_CASE("supmix agrees with the naive oracle") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng pick(seed, 5);
        const std::size_t n = 2 + pick.next_below(7);
        const std::size_t dim = 3 + pick.next_below(14);
        const double tau = kTaus[seed % 4];
        const double lambda = 0.2 + 0.15 * static_cast<double>(seed % 5);
        Rng rng(seed, 9);
        SupMixEmbeddings e;
        e.z_mix = naive::random_unit_rows(n, dim, rng);
        e.z_second = naive::random_unit_rows(n, dim, rng);
        e.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            e.labels[i] = static_cast<int>(rng.next_below(3));
        }
        e.lambda = lambda;
        for (Reduction red : {Reduction::verbatim, Reduction::mean}) {
            LossConfig cfg{tau, red, 1};
            CHECK(std::fabs(supmix_loss(e, cfg) -
                            naive::supmix(e.z_mix, e.z_second, e.labels, lambda, tau,
                                          red)) < 1e-10);
        }
    }
}

TEST_CASE("supmix at the lambda endpoints keeps a single branch") {
    Rng rng(3, 9);
    SupMixEmbeddings e;
    e.z_mix = naive::random_unit_rows(5, 7, rng);
    e.z_second = naive::random_unit_rows(5, 7, rng);
    e.labels = {0, 1, 0, 2, 1};
    LossConfig cfg{0.1, Reduction::verbatim, 1};
    e.lambda = 1.0;
    CHECK(std::fabs(supmix_loss(e, cfg) -
                    naive::supmix_branch(e.z_mix, e.z_second, e.labels, 0.1)) <
          1e-10);
    e.lambda = 0.5;
    const double mid = supmix_loss(e, cfg);
    e.lambda = 0.0;
    const double up_only = supmix_loss(e, cfg);
    e.lambda = 1.0;
    const double down_only = supmix_loss(e, cfg);
    CHECK(std::fabs(mid - 0.5 * (up_only + down_only)) < 1e-10);
}

TEST_CASE("orthogonal four-view batch gives log 3 per anchor") {
    EmbeddingSet e = orthonormal_set(4, 12, true);
    LossConfig cfg{1.0, Reduction::verbatim, 1};
    CHECK(std::fabs(loss_value(LossKind::infonce, e, cfg) - std::log(3.0)) < 1e-12);
    CHECK(std::fabs(loss_value(LossKind::unicon, e, cfg) - 4.0 * std::log(3.0)) <
          1e-12);
}

TEST_CASE("supcon hand oracle: identical class members, orthogonal classes") {
    // Two classes of four identical views each, tau = 1.  Every positive dot
    // is 1 and the denominator is 3e + 4, so each anchor contributes
    // -log(e / (3e + 4)).
    const std::size_t n = 8;
    EmbeddingSet e;
    e.anchors = Matrix(n, 4);
    for (std::size_t i = 0; i < n; ++i) e.anchors.at(i, i / 4) = 1.0;
    e.labels = {0, 0, 0, 0, 1, 1, 1, 1};
    e.pair = {1, 0, 3, 2, 5, 4, 7, 6};
    LossConfig cfg{1.0, Reduction::verbatim, 1};
    const double expected =
        -8.0 * std::log(std::exp(1.0) / (3.0 * std::exp(1.0) + 4.0));
    CHECK(std::fabs(loss_value(LossKind::supcon, e, cfg) - expected) < 1e-12);
}

TEST_CASE("universum orthogonal to all anchors inflates the denominator by 2N") {
    EmbeddingSet e = naive::random_set(4, 2, 24, 11, false);
    // Park the universum in coordinates no anchor touches.
    const std::size_t n = e.count();
    e.universum = Matrix(n, 24);
    for (std::size_t i = 0; i < n; ++i) e.universum.at(i, 24 - n + i) = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 24 - n; c < 24; ++c) e.anchors.at(i, c) = 0.0;
    }
    l2_normalize_rows(e.anchors);

    const double tau = 1.0;
    const auto sets = naive::same_label_sets(e.labels);
    double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double denom = static_cast<double>(n);  // 2N orthogonal universum rows
        for (std::size_t k = 0; k < n; ++k) {
            if (k != i) denom += std::exp(naive::dot(e.anchors, i, e.anchors, k));
        }
        double inner = 0.0;
        for (std::size_t d : sets[i]) {
            inner += std::log(std::exp(naive::dot(e.anchors, i, e.anchors, d)) / denom);
        }
        expected += -inner / static_cast<double>(sets[i].size());
    }
    LossConfig cfg{tau, Reduction::verbatim, 1};
    CHECK(std::fabs(loss_value(LossKind::add, e, cfg) - expected) < 1e-12);
}

TEST_CASE("add dominates supcon on identical inputs") {
    for (std::uint64_t seed = 40; seed < 48; ++seed) {
        EmbeddingSet e = naive::random_set(4, 2, 8, seed, true);
        LossConfig cfg{0.1, Reduction::verbatim, 1};
        CHECK(loss_value(LossKind::add, e, cfg) >
              loss_value(LossKind::supcon, e, cfg));
    }
}

TEST_CASE("unicon per-anchor lower bound holds") {
    const double tau = 0.1;
    const double bound = -1.0 / tau - std::log(7.0 * std::exp(1.0 / tau));
    for (std::uint64_t seed = 60; seed < 70; ++seed) {
        EmbeddingSet e = naive::random_set(4, 2, 8, seed, true);
        LossConfig cfg{tau, Reduction::verbatim, 1};
        CHECK(loss_value(LossKind::unicon, e, cfg) >= 8.0 * bound);
    }
}

TEST_CASE("un_uni is infonce plus its universum term") {
    for (std::uint64_t seed = 80; seed < 86; ++seed) {
        EmbeddingSet e = naive::random_set(5, 3, 10, seed, true);
        LossConfig cfg{0.1, Reduction::verbatim, 1};
        EmbeddingSet no_uni = e;
        no_uni.universum = Matrix();
        const double uni_part = loss_value(LossKind::un_uni, e, cfg) -
                                loss_value(LossKind::infonce, no_uni, cfg);
        double expected = naive::un_uni(e.anchors, e.universum, e.pair, 0.1,
                                        Reduction::verbatim) -
                          naive::infonce(e.anchors, e.pair, 0.1,
                                         Reduction::verbatim);
        CHECK(std::fabs(uni_part - expected) < 1e-10);
    }
}

TEST_CASE("supcon with singleton positives degenerates to infonce") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        EmbeddingSet e = naive::random_set(4, 1, 8, seed, false);
        // one class per sample: the only positive is the sibling view
        for (std::size_t s = 0; s < 4; ++s) {
            e.labels[2 * s] = static_cast<int>(s);
            e.labels[2 * s + 1] = static_cast<int>(s);
        }
        LossConfig mean{0.5, Reduction::mean, 1};
        CHECK(std::fabs(loss_value(LossKind::supcon, e, mean) -
                        loss_value(LossKind::infonce, e, mean)) < 1e-12);
    }
}

TEST_CASE("consistent permutations leave every loss unchanged") {
    EmbeddingSet e = naive::random_set(5, 2, 8, 123, true);
    const std::size_t n = e.count();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(9, 1);
    rng.shuffle(perm);
    std::vector<std::size_t> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;

    EmbeddingSet p;
    p.anchors = Matrix(n, e.dim());
    p.universum = Matrix(n, e.dim());
    p.labels.resize(n);
    p.pair.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < e.dim(); ++c) {
            p.anchors.at(i, c) = e.anchors.at(perm[i], c);
            p.universum.at(i, c) = e.universum.at(perm[i], c);
        }
        p.labels[i] = e.labels[perm[i]];
        p.pair[i] = inv[e.pair[perm[i]]];
    }
    LossConfig cfg{0.1, Reduction::verbatim, 1};
    for (LossKind k : {LossKind::infonce, LossKind::supcon, LossKind::add,
                       LossKind::unicon, LossKind::un_uni}) {
        CHECK(std::fabs(loss_value(k, e, cfg) - loss_value(k, p, cfg)) < 1e-12);
    }
}

TEST_CASE("temperature folds into the logits") {
    // Raw kernels place no unit-norm requirement, so tau can be absorbed by
    // scaling the rows: (z/sqrt(tau)).(z'/sqrt(tau)) = z.z'/tau.
    const double tau = 0.25;
    EmbeddingSet e = naive::random_set(4, 2, 8, 7, false);
    Matrix scaled = e.anchors;
    const double s = 1.0 / std::sqrt(tau);
    for (double& v : scaled.data) v *= s;
    CHECK(std::fabs(detail::infonce_raw(e.anchors, e.pair, tau,
                                        Reduction::verbatim, 1) -
                    detail::infonce_raw(scaled, e.pair, 1.0, Reduction::verbatim,
                                        1)) < 1e-12);
    CHECK(std::fabs(detail::supcon_raw(e.anchors, e.labels, tau,
                                       Reduction::verbatim, 1) -
                    detail::supcon_raw(scaled, e.labels, 1.0, Reduction::verbatim,
                                       1)) < 1e-12);
}

TEST_CASE("verbatim and mean reductions differ by the view count") {
    EmbeddingSet e = naive::random_set(4, 2, 8, 31, true);
    const double n = static_cast<double>(e.count());
    LossConfig verbatim{0.1, Reduction::verbatim, 1};
    LossConfig mean{0.1, Reduction::mean, 1};
    for (LossKind k : {LossKind::supcon, LossKind::add, LossKind::unicon}) {
        CHECK(std::fabs(loss_value(k, e, verbatim) / n - loss_value(k, e, mean)) <
              1e-12);
    }
    // infonce carries its own 1/2N in both conventions
    CHECK(std::fabs(loss_value(LossKind::infonce, e, verbatim) -
                    loss_value(LossKind::infonce, e, mean)) < 1e-12);
}

TEST_CASE("thread count never changes a loss value") {
    EmbeddingSet e = naive::random_set(6, 3, 10, 55, true);
    LossConfig one{0.1, Reduction::verbatim, 1};
    LossConfig four{0.1, Reduction::verbatim, 4};
    for (LossKind k : {LossKind::infonce, LossKind::supcon, LossKind::add,
                       LossKind::unicon, LossKind::un_uni}) {
        CHECK(loss_value(k, e, one) == loss_value(k, e, four));
    }
}

TEST_CASE("validation rejects bad inputs") {
    EmbeddingSet e = naive::random_set(3, 2, 6, 77, true);
    LossConfig cfg{0.1, Reduction::verbatim, 1};

    SUBCASE("non-finite embedding, main path and oracle alike") {
        e.anchors.at(0, 0) = std::nan("");
        CHECK_THROWS_AS(loss_value(LossKind::supcon, e, cfg), domain_error);
        CHECK_THROWS_AS(naive::supcon(e.anchors, e.labels, 0.1,
                                      Reduction::verbatim),
                        domain_error);
    }
    SUBCASE("row far from unit norm") {
        for (std::size_t c = 0; c < e.dim(); ++c) e.anchors.at(0, c) *= 1.5;
        CHECK_THROWS_AS(loss_value(LossKind::infonce, e, cfg), domain_error);
    }
    SUBCASE("positive-free anchor through the raw kernel") {
        std::vector<int> labels = {0, 0, 1, 2, 3, 4};
        CHECK_THROWS_AS(detail::supcon_raw(e.anchors, labels, 0.1,
                                           Reduction::verbatim, 1),
                        domain_error);
    }
    SUBCASE("missing universum") {
        e.universum = Matrix();
        CHECK_THROWS_AS(loss_value(LossKind::unicon, e, cfg), domain_error);
    }
    SUBCASE("non-positive temperature") {
        LossConfig bad{0.0, Reduction::verbatim, 1};
        CHECK_THROWS_AS(loss_value(LossKind::infonce, e, bad), config_error);
    }
    SUBCASE("supmix rejected by the embedding-set entry points") {
        CHECK_THROWS_AS(loss_value(LossKind::supmix, e, cfg), config_error);
        CHECK_THROWS_AS(embedding_gradient(LossKind::supmix, e, cfg), config_error);
    }
}
