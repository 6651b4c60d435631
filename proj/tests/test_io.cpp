#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ipgp/dataset_io.hpp"

using namespace ipgp;

TEST_SUITE_BEGIN("io");

TEST_CASE("dataset json round trip is lossless") {
    const auto cs = builtin_system(Builtin::CS);
    const TrajectoryDataset data = generate_dataset(cs, 2, 3, 0.1, 42);
    const std::string text = dataset_to_json(data);
    const TrajectoryDataset back = dataset_from_json(text);

    CHECK(back.d == data.d);
    CHECK(back.N == data.N);
    CHECK(back.M == data.M);
    CHECK(back.L == data.L);
    CHECK(back.noise_sigma == data.noise_sigma);
    for (int m = 0; m < data.M; ++m) {
        CHECK((back.Y[m] - data.Y[m]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.Z[m] - data.Z[m]).cwiseAbs().maxCoeff() == 0.0);
    }

    // serialization is deterministic
    CHECK(dataset_to_json(back) == text);
}

TEST_CASE("dataset json validation") {
    CHECK_THROWS(dataset_from_json("{\"d\":1}"));
    // non-increasing times
    const std::string bad =
        "{\"d\":1,\"N\":1,\"M\":1,\"L\":2,\"times\":[0.0,0.0],\"noise_sigma\":0.0,"
        "\"Y\":[[[0.0,0.0],[0.0,0.0]]],\"Z\":[[[0.0],[0.0]]]}";
    CHECK_THROWS(dataset_from_json(bad));
}

TEST_CASE("frames csv loading and normalization") {
    const char* path = "ipgp_test_frames.csv";
    {
        std::ofstream out(path);
        out << "0.0,10.0,2.0,30.0\n";
        out << "1.0,20.0,3.0,40.0\n";
        out << "2.0,30.0,4.0,50.0\n";
    }
    mat frames = load_frames_csv(path, 2); // N = 2 agents in d = 2
    CHECK(frames.rows() == 4);
    CHECK(frames.cols() == 3);
    CHECK(frames(1, 0) == 10.0);
    CHECK(frames(3, 2) == 50.0);

    normalize_frames(frames, 2);
    // x coordinates (rows 0 and 2) span [0,4] -> [0,1]
    CHECK(frames(0, 0) == doctest::Approx(0.0));
    CHECK(frames(2, 2) == doctest::Approx(1.0));
    // y coordinates (rows 1 and 3) span [10,50]
    CHECK(frames(1, 0) == doctest::Approx(0.0));
    CHECK(frames(3, 2) == doctest::Approx(1.0));
    CHECK(frames(1, 2) == doctest::Approx(0.5));

    std::remove(path);
}

TEST_SUITE_END();
