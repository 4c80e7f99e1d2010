#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "unicon/dataio.hpp"
#include "unicon/diagnostics.hpp"
#include "unicon/encoder.hpp"
#include "unicon/errors.hpp"

using namespace unicon;

namespace {

EncoderParams identity_encoder(std::size_t d) {
    EncoderParams p;
    p.weights.emplace_back(d, d);
    for (std::size_t i = 0; i < d; ++i) p.weights[0].at(i, i) = 1.0;
    p.biases.emplace_back(d, 0.0);
    return p;
}

LabeledBatch two_band_batch() {
    LabeledBatch data;
    data.features = Matrix(10, 3);
    for (std::size_t i = 0; i < 10; ++i) {
        data.features.at(i, 0) = 1.0 + 0.1 * static_cast<double>(i);
        data.features.at(i, 1) = i < 5 ? 1.0 : -1.0;
        data.features.at(i, 2) = 0.25 * static_cast<double>(i);
    }
    data.labels = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    data.class_count = 2;
    return data;
}

}  // namespace

TEST_CASE("hardness profile scores negatives by mean dot product") {
    const double co = 0.5;
    const double si = std::sqrt(3.0) / 2.0;
    EmbeddingSet set;
    set.anchors = Matrix(3, 2);
    set.anchors.at(0, 0) = 1.0;
    set.anchors.at(1, 1) = 1.0;
    set.anchors.at(2, 0) = co;
    set.anchors.at(2, 1) = si;
    set.labels = {0, 1, 1};

    HardnessValues vals = hardness_profile(set);
    REQUIRE(vals.conventional.size() == 3);
    CHECK(std::fabs(vals.conventional[0] - 0.5 * (0.0 + co)) < 1e-15);
    CHECK(std::fabs(vals.conventional[1] - 0.0) < 1e-15);
    CHECK(std::fabs(vals.conventional[2] - co) < 1e-15);
    CHECK(vals.universum.empty());

    SUBCASE("mixtures score against every anchor") {
        set.universum = Matrix(3, 2);
        set.universum.at(0, 0) = 1.0;  // equals anchor 0
        set.universum.at(1, 1) = 1.0;
        set.universum.at(2, 0) = 1.0;
        set.pair = {0, 0, 0};
        HardnessValues with = hardness_profile(set);
        CHECK(std::fabs(with.universum[0] - (1.0 + 0.0 + co) / 3.0) < 1e-15);
        CHECK(std::fabs(with.universum[1] - (0.0 + 1.0 + si) / 3.0) < 1e-15);
    }
    SUBCASE("one class is not enough") {
        set.labels = {0, 0, 0};
        CHECK_THROWS_AS(hardness_profile(set), domain_error);
    }
    SUBCASE("empty set") {
        EmbeddingSet empty;
        CHECK_THROWS_AS(hardness_profile(empty), domain_error);
    }
}

TEST_CASE("hardness values slice the dataset with an even stride") {
    LabeledBatch data = two_band_batch();
    EncoderParams params = init_encoder({3, 6, 2}, Activation::relu, 4);
    MixPolicy policy;
    const std::uint64_t seed = 77;

    // cap 4 over 10 samples picks indices 0, 2, 5, 7
    HardnessValues strided = hardness_values(params, data, policy, 4, seed);
    LabeledBatch slice = subset(data, {0, 2, 5, 7});
    UniversumBatch uni = mix_universum(slice.features, slice.labels, policy, seed);
    EmbeddingSet manual;
    manual.anchors = forward(params, slice.features).z;
    manual.universum = forward(params, uni.mixtures).z;
    manual.labels = slice.labels;
    HardnessValues expect = hardness_profile(manual);
    REQUIRE(strided.conventional.size() == 4);
    REQUIRE(strided.universum.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(strided.conventional[i] == expect.conventional[i]);
        CHECK(strided.universum[i] == expect.universum[i]);
    }
    CHECK(strided.lambda == uni.lambda);

    SUBCASE("a cap beyond the dataset is exhaustive") {
        HardnessValues full = hardness_values(params, data, policy, 1000, seed);
        CHECK(full.conventional.size() == 10);
    }
    SUBCASE("conventional scores are permutation invariant when exhaustive") {
        std::vector<std::size_t> perm = {9, 3, 0, 7, 5, 1, 8, 2, 6, 4};
        LabeledBatch shuffled = subset(data, perm);
        HardnessValues a = hardness_values(params, data, policy, 1000, seed);
        HardnessValues b = hardness_values(params, shuffled, policy, 1000, seed);
        std::sort(a.conventional.begin(), a.conventional.end());
        std::sort(b.conventional.begin(), b.conventional.end());
        for (std::size_t i = 0; i < a.conventional.size(); ++i) {
            CHECK(std::fabs(a.conventional[i] - b.conventional[i]) < 1e-12);
        }
    }
    SUBCASE("a slice touching one class is refused") {
        // cap 2 picks indices 0 and 5 here, so stack the first class deeper
        LabeledBatch lopsided = data;
        lopsided.labels = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
        CHECK_THROWS_AS(hardness_values(params, lopsided, policy, 2, seed),
                        domain_error);
    }
    SUBCASE("cap below two is refused") {
        CHECK_THROWS_AS(hardness_values(params, data, policy, 1, seed), config_error);
    }
}

TEST_CASE("histogram bins cover [-1, 1] with boundary clamping") {
    HardnessValues vals;
    vals.conventional = {-1.0, -0.97, 0.0, 0.999, 1.0};
    HardnessHistogram h = make_histogram(vals, 7);
    CHECK(h.epoch == 7);
    REQUIRE(h.edges.size() == 41);
    CHECK(h.edges.front() == -1.0);
    CHECK(h.edges.back() == 1.0);
    CHECK(h.conventional[0] == 2);
    CHECK(h.conventional[20] == 1);
    CHECK(h.conventional[39] == 2);
    std::size_t total = 0;
    for (std::size_t c : h.conventional) total += c;
    CHECK(total == vals.conventional.size());
    CHECK(std::fabs(h.conventional_mean - (-1.0 - 0.97 + 0.0 + 0.999 + 1.0) / 5.0) <
          1e-15);
    CHECK(h.universum_mean == 0.0);
    for (std::size_t c : h.universum) CHECK(c == 0);

    SUBCASE("custom bin count") {
        HardnessHistogram quarters = make_histogram(vals, 1, 4);
        REQUIRE(quarters.edges.size() == 5);
        CHECK(quarters.edges[1] == -0.5);
        CHECK(quarters.conventional[0] == 2);
    }
    SUBCASE("zero bins are refused") {
        CHECK_THROWS_AS(make_histogram(vals, 1, 0), config_error);
    }
}

TEST_CASE("record_hardness is the histogram of the sliced values") {
    LabeledBatch data = two_band_batch();
    EncoderParams params = init_encoder({3, 6, 2}, Activation::relu, 4);
    MixPolicy policy;
    HardnessHistogram rec = record_hardness(params, data, policy, 6, 9, 55);
    HardnessHistogram manual =
        make_histogram(hardness_values(params, data, policy, 6, 55), 9);
    CHECK(rec.epoch == 9);
    CHECK(rec.conventional == manual.conventional);
    CHECK(rec.universum == manual.universum);
    CHECK(rec.conventional_mean == manual.conventional_mean);
    CHECK(rec.universum_mean == manual.universum_mean);
}

TEST_CASE("two-sample KS statistic by hand") {
    SUBCASE("interleaved singleton") {
        KsResult r = two_sample_ks({0.0, 1.0}, {0.5});
        CHECK(std::fabs(r.statistic - 0.5) < 1e-15);
        CHECK(r.p_value > 0.0);
        CHECK(r.p_value <= 1.0);
    }
    SUBCASE("identical samples") {
        std::vector<double> a = {0.1, 0.4, 0.4, 0.9};
        KsResult r = two_sample_ks(a, a);
        CHECK(r.statistic == 0.0);
        CHECK(r.p_value == 1.0);
    }
    SUBCASE("tied values advance both sides") {
        KsResult r = two_sample_ks({0.0, 0.0, 1.0}, {0.0, 1.0, 1.0});
        CHECK(std::fabs(r.statistic - 1.0 / 3.0) < 1e-15);
    }
    SUBCASE("disjoint supports are maximally separated") {
        std::vector<double> a, b;
        for (int i = 0; i < 16; ++i) {
            a.push_back(0.4 * i / 16.0);
            b.push_back(0.6 + 0.4 * i / 16.0);
        }
        KsResult r = two_sample_ks(a, b);
        CHECK(r.statistic == 1.0);
        CHECK(r.p_value < 1e-6);
    }
    SUBCASE("empty samples are refused") {
        CHECK_THROWS_AS(two_sample_ks({}, {1.0}), domain_error);
        CHECK_THROWS_AS(two_sample_ks({1.0}, {}), domain_error);
    }
}

TEST_CASE("histogram similarity compares shapes, not locations") {
    HardnessValues vals;
    // 3 + 5 values in adjacent bins near -0.5, the same profile near +0.5
    for (int i = 0; i < 3; ++i) vals.conventional.push_back(-0.48);
    for (int i = 0; i < 5; ++i) vals.conventional.push_back(-0.43);
    for (int i = 0; i < 3; ++i) vals.universum.push_back(0.52);
    for (int i = 0; i < 5; ++i) vals.universum.push_back(0.57);
    HardnessHistogram h = make_histogram(vals, 1);

    KsResult shape = histogram_similarity(h);
    CHECK(shape.statistic == 0.0);
    CHECK(shape.p_value == 1.0);
    // the value-level comparison sees the shift at full strength
    KsResult value = two_sample_ks(vals.conventional, vals.universum);
    CHECK(value.statistic == 1.0);

    SUBCASE("identical populations also agree") {
        HardnessValues same;
        same.conventional = {-0.2, 0.1, 0.1, 0.6};
        same.universum = same.conventional;
        KsResult r = histogram_similarity(make_histogram(same, 1));
        CHECK(r.statistic == 0.0);
        CHECK(r.p_value == 1.0);
    }
    SUBCASE("spread against spike disagrees") {
        HardnessValues mixed;
        for (int b = 0; b < 40; ++b) {
            mixed.conventional.push_back(-1.0 + (b + 0.5) / 20.0);
            mixed.universum.push_back(-0.99);
        }
        KsResult r = histogram_similarity(make_histogram(mixed, 1));
        CHECK(r.statistic > 0.9);
        CHECK(r.p_value < 1e-6);
    }
}

TEST_CASE("margin report on a two-point geometry") {
    LabeledBatch data;
    data.features = Matrix(4, 2);
    data.features.at(0, 0) = 2.0;
    data.features.at(1, 0) = 2.0;
    data.features.at(2, 1) = 3.0;
    data.features.at(3, 1) = 3.0;
    data.labels = {0, 0, 1, 1};
    data.class_count = 2;
    EncoderParams id2 = identity_encoder(2);
    MixPolicy policy;

    MarginReport rep = margin_report(id2, data, policy, 5);
    REQUIRE(rep.class_ids == std::vector<int>{0, 1});
    CHECK(rep.centroids.at(0, 0) == 1.0);
    CHECK(rep.centroids.at(0, 1) == 0.0);
    CHECK(rep.centroids.at(1, 0) == 0.0);
    CHECK(rep.centroids.at(1, 1) == 1.0);
    CHECK(std::fabs(rep.centroid_distance.at(0, 1) - std::sqrt(2.0)) < 1e-15);
    CHECK(rep.centroid_distance.at(1, 0) == rep.centroid_distance.at(0, 1));
    CHECK(rep.centroid_distance.at(0, 0) == 0.0);
    CHECK(rep.mean_anchor_to_own == 0.0);

    // every mixture is 0.5 (2,0) + 0.5 (0,3) = (1, 1.5), nearest centroid e1
    const double s = std::sqrt(3.25);
    const double expect = std::sqrt(std::pow(1.0 / s, 2.0) +
                                    std::pow(1.5 / s - 1.0, 2.0));
    CHECK(std::fabs(rep.mean_universum_to_nearest - expect) < 1e-12);
    CHECK(std::isinf(rep.separation_ratio));
}

TEST_CASE("margin report on blobs behaves structurally") {
    DatasetSpec spec;
    spec.classes = 3;
    spec.per_class = 20;
    spec.dim = 6;
    spec.seed = 8;
    LabeledBatch data = make_blobs(spec);
    EncoderParams params = init_encoder({6, 8, 3}, Activation::tanh_act, 2);
    MixPolicy policy;

    MarginReport rep = margin_report(params, data, policy, 3);
    REQUIRE(rep.class_ids.size() == 3);
    CHECK(rep.centroids.rows == 3);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = r + 1; c < 3; ++c) {
            CHECK(rep.centroid_distance.at(r, c) > 0.0);
            CHECK(rep.centroid_distance.at(r, c) == rep.centroid_distance.at(c, r));
        }
    }
    CHECK(rep.mean_anchor_to_own > 0.0);
    CHECK(rep.mean_universum_to_nearest > 0.0);
    CHECK(std::fabs(rep.separation_ratio -
                    rep.mean_universum_to_nearest / rep.mean_anchor_to_own) < 1e-15);

    MarginReport again = margin_report(params, data, policy, 3);
    CHECK(again.mean_universum_to_nearest == rep.mean_universum_to_nearest);

    SUBCASE("degenerate inputs") {
        LabeledBatch flat = data;
        std::fill(flat.labels.begin(), flat.labels.end(), 0);
        flat.class_count = 1;
        CHECK_THROWS_AS(margin_report(params, flat, policy, 3), domain_error);
        LabeledBatch empty;
        CHECK_THROWS_AS(margin_report(params, empty, policy, 3), domain_error);
    }
}

TEST_CASE("embedding export round trips through csv") {
    DatasetSpec spec;
    spec.classes = 2;
    spec.per_class = 6;
    spec.dim = 4;
    spec.seed = 5;
    LabeledBatch data = make_blobs(spec);
    EncoderParams params = init_encoder({4, 6, 2}, Activation::tanh_act, 6);
    MixPolicy policy;
    const std::string sample_path = "/tmp/unicon_test_samples.csv";
    const std::string mixture_path = "/tmp/unicon_test_mixtures.csv";
    export_embeddings(params, data, policy, sample_path, mixture_path, 19);

    Matrix z = forward(params, data.features).z;
    LabeledBatch parsed = load_csv(sample_path, 0);
    REQUIRE(parsed.size() == data.size());
    REQUIRE(parsed.dim() == 2);
    CHECK(parsed.labels == data.labels);
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(parsed.features.at(i, j) == z.at(i, j));
        }
    }

    std::ifstream mix(mixture_path);
    REQUIRE(mix.good());
    std::string header;
    std::getline(mix, header);
    CHECK(header == "label,dim0,dim1");
    std::size_t rows = 0;
    for (std::string line; std::getline(mix, line);) {
        CHECK(line.rfind("-1,", 0) == 0);
        ++rows;
    }
    CHECK(rows == data.size());
    std::remove(sample_path.c_str());
    std::remove(mixture_path.c_str());

    LabeledBatch empty;
    CHECK_THROWS_AS(
        export_embeddings(params, empty, policy, sample_path, mixture_path, 19),
        domain_error);
}

TEST_CASE("hardness history csv layout") {
    HardnessValues vals;
    vals.conventional = {-0.5, 0.5};
    vals.universum = {0.0};
    std::vector<HardnessHistogram> history = {make_histogram(vals, 1),
                                              make_histogram(vals, 2)};
    const std::string path = "/tmp/unicon_test_hardness.csv";
    write_hardness_csv(history, path);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 1 + 2 * 80);
    CHECK(lines[0] == "epoch,kind,bin_lo,bin_hi,count");
    CHECK(lines[1].rfind("1,conventional,-1,", 0) == 0);
    CHECK(lines[41].rfind("1,universum,", 0) == 0);
    CHECK(lines[81].rfind("2,conventional,", 0) == 0);
    std::remove(path.c_str());

    CHECK_THROWS_AS(write_hardness_csv(history, "/nonexistent/dir/h.csv"),
                    data_error);
}
