#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "mothpose/annotations.hpp"
#include "mothpose/errors.hpp"

using namespace mothpose;
namespace fs = std::filesystem;

namespace {

const char* kGoodHeader =
    "frame_id,image,head_x,head_y,abd_x,abd_y,lw_x,lw_y,rw_x,rw_y,"
    "occ_head,occ_abd,occ_lw,occ_rw,bbox_x,bbox_y,bbox_w,bbox_h";

fs::path temp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "mothpose_annotation_tests";
    fs::create_directories(dir);
    return dir / name;
}

fs::path write_csv(const char* name, const std::string& body) {
    const fs::path p = temp_file(name);
    std::ofstream(p) << body;
    return p;
}

std::string good_row(int id) {
    return std::to_string(id) +
           ",frames/f.pgm,400,250,380,340,300,280,500,285,0,0,0,1,290,240,220,110";
}

AnnotatedFrame make_frame(std::int64_t id) {
    AnnotatedFrame f;
    f.frame_id = id;
    f.image_ref = "frames/" + std::to_string(id) + ".pgm";
    f.landmarks = {400.25, 250, 380, 340.5, 300, 280, 500, 285};
    f.occluded = {false, false, true, false};
    f.bbox_x = 290;
    f.bbox_y = 240;
    f.bbox_w = 220.5;
    f.bbox_h = 110;
    return f;
}

std::vector<AnnotatedFrame> make_frames(int n) {
    std::vector<AnnotatedFrame> frames;
    for (int i = 1; i <= n; ++i) frames.push_back(make_frame(i));
    return frames;
}

std::set<std::int64_t> ids(const std::vector<AnnotatedFrame>& frames) {
    std::set<std::int64_t> out;
    for (const auto& f : frames) out.insert(f.frame_id);
    return out;
}

} // namespace

TEST_CASE("annotation save/load round-trips exactly") {
    std::vector<AnnotatedFrame> frames = {make_frame(3), make_frame(1), make_frame(2)};
    frames[0].landmarks[0] = 123.4567890123;
    const fs::path p = temp_file("roundtrip.csv");
    save_annotations(frames, p);
    const auto back = load_annotations(p);
    REQUIRE(back.size() == 3);
    // Loading sorts by frame id.
    CHECK(back[0].frame_id == 1);
    CHECK(back[1].frame_id == 2);
    CHECK(back[2].frame_id == 3);
    CHECK(back[2].landmarks == frames[0].landmarks);
    CHECK(back[2].occluded == frames[0].occluded);
    CHECK(back[0].image_ref == frames[1].image_ref);
    CHECK(back[0].bbox_w == frames[1].bbox_w);
}

TEST_CASE("annotation loader accepts crlf and blank lines") {
    const fs::path p = write_csv("crlf.csv", std::string(kGoodHeader) + "\r\n" + good_row(1) +
                                                 "\r\n\r\n" + good_row(2) + "\r\n");
    const auto frames = load_annotations(p);
    REQUIRE(frames.size() == 2);
    CHECK(frames[1].frame_id == 2);
    CHECK(frames[0].occluded[3]);
}

TEST_CASE("annotation loader rejects malformed input") {
    CHECK_THROWS_AS(load_annotations(temp_file("missing.csv")), IoError);
    CHECK_THROWS_AS(load_annotations(write_csv("empty.csv", "")), ParseError);
    CHECK_THROWS_AS(load_annotations(write_csv("badheader.csv", "frame,stuff\n")), ParseError);

    const std::string header(kGoodHeader);
    CHECK_THROWS_AS(load_annotations(write_csv("shortrow.csv", header + "\n1,img,2,3\n")),
                    ParseError);
    CHECK_THROWS_AS(
        load_annotations(write_csv(
            "badnum.csv", header + "\n1,img,x,250,380,340,300,280,500,285,0,0,0,0,290,240,220,110\n")),
        ParseError);
    CHECK_THROWS_AS(
        load_annotations(write_csv(
            "badflag.csv", header + "\n1,img,400,250,380,340,300,280,500,285,0,2,0,0,290,240,220,110\n")),
        ParseError);

    // Line numbers are reported for malformed rows.
    try {
        load_annotations(write_csv("lineno.csv", header + "\n" + good_row(1) + "\n1,img,2,3\n"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("annotation loader validates geometry") {
    const std::string header(kGoodHeader);
    // Landmark x = 800 is outside [0, 800).
    CHECK_THROWS_AS(
        load_annotations(write_csv(
            "oob.csv", header + "\n1,img,800,250,380,340,300,280,500,285,0,0,0,0,290,240,220,110\n")),
        ValidationError);
    // Zero-size bbox.
    CHECK_THROWS_AS(
        load_annotations(write_csv(
            "flatbox.csv", header + "\n1,img,400,250,380,340,300,280,500,285,0,0,0,0,290,240,0,110\n")),
        ValidationError);
    // Bbox spills past the right edge.
    CHECK_THROWS_AS(
        load_annotations(write_csv(
            "spill.csv", header + "\n1,img,400,250,380,340,300,280,500,285,0,0,0,0,700,240,220,110\n")),
        ValidationError);
    // Frame ids are 1-based.
    CHECK_THROWS_AS(
        load_annotations(write_csv(
            "zeroid.csv", header + "\n0,img,400,250,380,340,300,280,500,285,0,0,0,0,290,240,220,110\n")),
        ValidationError);
    // Duplicate ids.
    CHECK_THROWS_AS(load_annotations(write_csv("dup.csv", header + "\n" + good_row(4) + "\n" +
                                                              good_row(4) + "\n")),
                    ValidationError);
}

TEST_CASE("first-half split puts frames 1..400 of 800 in train") {
    const auto s = split(make_frames(800), {SplitKind::FirstHalf, 0, 0, 0});
    REQUIRE(s.train.size() == 400);
    REQUIRE(s.test.size() == 400);
    CHECK(s.train.front().frame_id == 1);
    CHECK(s.train.back().frame_id == 400);
    CHECK(s.test.front().frame_id == 401);
    CHECK(s.test.back().frame_id == 800);
}

TEST_CASE("first-half split of an odd count favors train") {
    const auto s = split(make_frames(421), {SplitKind::FirstHalf, 0, 0, 0});
    CHECK(s.train.size() == 211);
    CHECK(s.test.size() == 210);
    CHECK(s.train.back().frame_id == 211);
    CHECK(s.test.front().frame_id == 212);
}

TEST_CASE("interleaved split separates odd and even frame ids") {
    const auto s = split(make_frames(800), {SplitKind::Interleaved, 0, 0, 0});
    REQUIRE(s.train.size() == 400);
    REQUIRE(s.test.size() == 400);
    for (const auto& f : s.train) CHECK(f.frame_id % 2 == 1);
    for (const auto& f : s.test) CHECK(f.frame_id % 2 == 0);
    CHECK(s.train.front().frame_id == 1);
    CHECK(s.test.front().frame_id == 2);
}

TEST_CASE("random split draws disjoint train and test sets") {
    const auto frames = make_frames(800);
    SplitStrategy strat{SplitKind::RandomK, 600, 200, 42};
    const auto s = split(frames, strat);
    REQUIRE(s.train.size() == 600);
    REQUIRE(s.test.size() == 200);

    const auto train_ids = ids(s.train);
    const auto test_ids = ids(s.test);
    CHECK(train_ids.size() == 600);
    CHECK(test_ids.size() == 200);
    for (std::int64_t id : test_ids) CHECK(train_ids.count(id) == 0);

    // Reproducible under the same seed, different under another.
    const auto again = split(frames, strat);
    CHECK(ids(again.train) == train_ids);
    CHECK(ids(again.test) == test_ids);
    SplitStrategy other{SplitKind::RandomK, 600, 200, 43};
    CHECK(ids(split(frames, other).test) != test_ids);

    // Outputs stay sorted by frame id.
    for (std::size_t i = 1; i < s.train.size(); ++i)
        CHECK(s.train[i - 1].frame_id < s.train[i].frame_id);
}

TEST_CASE("random split can leave frames unused") {
    const auto s = split(make_frames(800), {SplitKind::RandomK, 100, 200, 7});
    CHECK(s.train.size() == 100);
    CHECK(s.test.size() == 200);
    const auto train_ids = ids(s.train);
    for (const auto& f : s.test) CHECK(train_ids.count(f.frame_id) == 0);
}

TEST_CASE("random split rejects oversubscription") {
    CHECK_THROWS_AS(split(make_frames(800), {SplitKind::RandomK, 650, 200, 0}), SizeError);
    CHECK_THROWS_AS(split(make_frames(800), {SplitKind::RandomK, 0, 200, 0}), SizeError);
    CHECK_NOTHROW(split(make_frames(800), {SplitKind::RandomK, 600, 200, 0}));
}
