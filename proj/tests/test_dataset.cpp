#include <algorithm>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "mclnn/dataset.hpp"
#include "mclnn/errors.hpp"
#include "oracles.hpp"

using namespace mclnn;

TEST_CASE("manifest parsing") {
    const std::string csv =
        "path,fold,label\n"
        "audio/dog1.wav,1,dog_bark\n"
        "audio/siren 02.wav,2,siren\n"
        "audio/dog2.wav,10,dog_bark\n";
    const FoldManifest manifest = parse_manifest(csv);
    REQUIRE(manifest.entries.size() == 3);
    CHECK(manifest.entries[0].path == "audio/dog1.wav");
    CHECK(manifest.entries[1].fold == 2);
    CHECK(manifest.entries[1].label == "siren");
    CHECK(manifest.fold_count == 10);
    CHECK(manifest.classes == std::vector<std::string>{"dog_bark", "siren"});
    CHECK(manifest.index_of("dog_bark") == 0);
    CHECK(manifest.index_of("siren") == 1);
    CHECK_THROWS_AS(manifest.index_of("cat"), DataError);

    SUBCASE("quoted fields with embedded commas") {
        const FoldManifest quoted = parse_manifest(
            "path,fold,label\n\"a,b.wav\",1,\"car_horn\"\n");
        CHECK(quoted.entries[0].path == "a,b.wav");
        CHECK(quoted.entries[0].label == "car_horn");
    }
    SUBCASE("windows line endings and blank lines") {
        const FoldManifest crlf = parse_manifest("path,fold,label\r\nx.wav,1,dog\r\n\r\n");
        CHECK(crlf.entries.size() == 1);
    }
}

TEST_CASE("manifest rejection") {
    CHECK_THROWS_AS(parse_manifest(""), DataError);
    CHECK_THROWS_AS(parse_manifest("path,fold\nx.wav,1\n"), DataError);
    CHECK_THROWS_AS(parse_manifest("fold,path,label\n1,x.wav,dog\n"), DataError);
    CHECK_THROWS_AS(parse_manifest("path,fold,label\n"), DataError);  // no entries
    CHECK_THROWS_AS(parse_manifest("path,fold,label\nx.wav,zero,dog\n"), DataError);
    CHECK_THROWS_AS(parse_manifest("path,fold,label\nx.wav,0,dog\n"), DataError);
    CHECK_THROWS_AS(parse_manifest("path,fold,label\nx.wav,-3,dog\n"), DataError);
    CHECK_THROWS_AS(parse_manifest("path,fold,label\nx.wav,1\n"), DataError);

    // Duplicate paths are named in the diagnostic.
    try {
        parse_manifest("path,fold,label\nx.wav,1,dog\nx.wav,2,dog\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("x.wav") != std::string::npos);
    }

    // A single-entry manifest parses; fold-count rules apply at split time.
    CHECK_NOTHROW(parse_manifest("path,fold,label\nx.wav,1,dog\n"));
}

TEST_CASE("fold rotation") {
    const FoldSplit s1 = fold_split(10, 1);
    CHECK(s1.test_fold == 1);
    CHECK(s1.validation_fold == 2);
    CHECK(s1.train_folds == std::vector<int>{3, 4, 5, 6, 7, 8, 9, 10});

    const FoldSplit s10 = fold_split(10, 10);
    CHECK(s10.validation_fold == 1);
    CHECK(s10.train_folds == std::vector<int>{2, 3, 4, 5, 6, 7, 8, 9});

    const FoldSplit s3 = fold_split(3, 2);
    CHECK(s3.validation_fold == 3);
    CHECK(s3.train_folds == std::vector<int>{1});

    CHECK_THROWS_AS(fold_split(2, 1), DataError);
    CHECK_THROWS_AS(fold_split(10, 0), DataError);
    CHECK_THROWS_AS(fold_split(10, 11), DataError);

    SUBCASE("every fold must be populated") {
        // folds 1,2,4 present, 3 missing
        const FoldManifest gappy = parse_manifest(
            "path,fold,label\na.wav,1,x\nb.wav,2,x\nc.wav,4,x\n");
        CHECK_THROWS_AS(fold_split(gappy, 1), DataError);
        const FoldManifest full = parse_manifest(
            "path,fold,label\na.wav,1,x\nb.wav,2,x\nc.wav,3,x\nd.wav,4,x\n");
        CHECK_NOTHROW(fold_split(full, 1));
    }
}

TEST_CASE("segment extraction") {
    FeatureClip clip;
    clip.frames.resize(10, 3);
    for (Eigen::Index t = 0; t < 10; ++t) {
        clip.frames.row(t).setConstant(static_cast<double>(t));
    }

    SUBCASE("hop one slides over every start") {
        const auto segments = extract_segments(clip, 4, 1, 7);
        REQUIRE(segments.size() == 7);
        for (std::size_t i = 0; i < segments.size(); ++i) {
            CHECK(segments[i].start_frame == static_cast<Eigen::Index>(i));
            CHECK(segments[i].clip_index == 7);
            CHECK(segments[i].frames(0, 0) == static_cast<double>(i));
            CHECK(segments[i].frames.rows() == 4);
        }
    }
    SUBCASE("larger hops skip starts") {
        CHECK(segment_starts(10, 4, 3) == std::vector<Eigen::Index>{0, 3, 6});
        CHECK(segment_starts(10, 10, 5) == std::vector<Eigen::Index>{0});
    }
    SUBCASE("short clips pad by repeating the final frame") {
        const auto segments = extract_segments(clip, 25, 1);
        REQUIRE(segments.size() == 1);
        CHECK(segments[0].frames.rows() == 25);
        CHECK(segments[0].frames(9, 0) == 9.0);
        for (Eigen::Index t = 10; t < 25; ++t) CHECK(segments[0].frames(t, 1) == 9.0);
    }
    SUBCASE("standardization applies inside segment_frames") {
        Standardizer s;
        s.means = Eigen::VectorXd::Constant(3, 1.0);
        s.stds = Eigen::VectorXd::Constant(3, 2.0);
        const Eigen::MatrixXd seg = segment_frames(clip.frames, 2, 3, &s);
        CHECK(seg(0, 0) == doctest::Approx((2.0 - 1.0) / 2.0));
        CHECK(seg(2, 2) == doctest::Approx((4.0 - 1.0) / 2.0));
    }
}

TEST_CASE("probability voting") {
    Eigen::VectorXd a(3), b(3);
    a << 0.7, 0.2, 0.1;
    b << 0.1, 0.7, 0.2;
    const VoteResult r = vote({a, b});
    CHECK(r.class_index == 1);  // means: 0.40, 0.45, 0.15
    CHECK(r.mean_probs(0) == doctest::Approx(0.4));
    CHECK(r.mean_probs(1) == doctest::Approx(0.45));
    CHECK(r.mean_probs(2) == doctest::Approx(0.15));

    SUBCASE("exact ties pick the lower index") {
        Eigen::VectorXd tie(2);
        tie << 0.5, 0.5;
        CHECK(vote({tie}).class_index == 0);
    }
    SUBCASE("degenerate inputs are rejected") {
        CHECK_THROWS_AS(vote({}), std::invalid_argument);
        Eigen::VectorXd shorter(2);
        shorter << 0.5, 0.5;
        CHECK_THROWS_AS(vote({a, shorter}), std::invalid_argument);
    }
}

TEST_CASE("predict_clip equals a manual segment loop") {
    testutil::RandomModelSpec spec;
    spec.features = 8;
    spec.extra_frames = 2;
    const ModelParams params = testutil::random_model(spec, 55);
    FeatureClip clip;
    clip.frames = Eigen::MatrixXd::Random(17, 8);

    const Eigen::Index q = params.segment_frames();
    std::vector<Eigen::VectorXd> probs;
    for (const Eigen::Index start : segment_starts(17, q, 2)) {
        Segment seg;
        seg.frames = segment_frames(clip.frames, start, q, nullptr);
        probs.push_back(model_forward(seg, params, false));
    }
    const VoteResult direct = vote(probs);
    const VoteResult via = predict_clip(clip, params, nullptr, 2);
    CHECK(via.class_index == direct.class_index);
    CHECK((via.mean_probs - direct.mean_probs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("confusion table format") {
    EvaluationReport report;
    report.classes = {"dog_bark", "siren"};
    report.confusion = Eigen::MatrixXi::Zero(2, 2);
    report.confusion << 8, 2, 1, 9;
    const std::string table = format_confusion(report);
    CHECK(table.find("dog_bark") != std::string::npos);
    CHECK(table.find("siren") != std::string::npos);
    CHECK(table.find('8') != std::string::npos);
    CHECK(table.find('9') != std::string::npos);
    // Header row plus one row per class.
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}
