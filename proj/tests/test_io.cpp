#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"
#include "touchless/fileio.hpp"
#include "touchless/image_io.hpp"

using namespace touchless;

TEST(ImageIo, PngRoundTrip) {
    std::mt19937_64 rng(1);
    fixture::TempDir dir("png");
    for (int ch : {1, 3}) {
        const Image img = fixture::random_image(13, 7, ch, rng);
        write_image(img, dir / "a.png");
        EXPECT_EQ(read_image(dir / "a.png"), img);
        EXPECT_EQ(decode_png(encode_png(img)), img);
    }
}

TEST(ImageIo, BmpRoundTripIncludingRowPadding) {
    std::mt19937_64 rng(2);
    fixture::TempDir dir("bmp");
    for (int ch : {1, 3})
        for (int w : {1, 2, 3, 5, 170}) {
            const Image img = fixture::random_image(w, 4, ch, rng);
            write_image(img, dir / "a.BMP");
            EXPECT_EQ(read_image(dir / "a.BMP"), img) << "w=" << w << " ch=" << ch;
        }
}

TEST(ImageIo, EncodingIsDeterministic) {
    std::mt19937_64 rng(3);
    const Image img = fixture::random_image(31, 17, 3, rng);
    EXPECT_EQ(encode_png(img), encode_png(img));
    EXPECT_EQ(encode_bmp(img), encode_bmp(img));
}

TEST(ImageIo, TopDownBmpIsSupported) {
    std::mt19937_64 rng(4);
    const Image img = fixture::random_image(4, 3, 3, rng);
    auto bytes = encode_bmp(img);
    // Negate the height and reverse the row order to build a top-down file.
    const std::int32_t neg = -3;
    std::memcpy(&bytes[22], &neg, 4);
    const std::size_t stride = 12, offset = 54;
    std::vector<std::uint8_t> rows(bytes.begin() + offset, bytes.end());
    for (int r = 0; r < 3; ++r)
        std::copy_n(rows.begin() + (2 - r) * stride, stride, bytes.begin() + offset + r * stride);
    EXPECT_EQ(decode_bmp(bytes), img);
}

TEST(ImageIo, RejectsUnknownAndCorruptInput) {
    fixture::TempDir dir("io-bad");
    write_text_atomic(dir / "x.png", "not an image");
    EXPECT_THROW(read_image(dir / "x.png"), DataError);
    EXPECT_THROW(read_image(dir / "missing.png"), DataError);
    EXPECT_THROW(decode_bmp(std::vector<std::uint8_t>{'B', 'M', 0}), DataError);
    EXPECT_THROW(write_image(Image(2, 2, 1), dir / "a.jpg"), std::invalid_argument);
}

TEST(FileIo, AtomicWriteLeavesNoTemporary) {
    fixture::TempDir dir("atomic");
    write_text_atomic(dir / "f.txt", "one");
    write_text_atomic(dir / "f.txt", "two");
    EXPECT_EQ(read_text_file(dir / "f.txt"), "two");
    int entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
    EXPECT_EQ(entries, 1);
    write_text_atomic(dir / "a" / "b" / "g.txt", "nested");
    EXPECT_EQ(read_text_file(dir / "a" / "b" / "g.txt"), "nested");
}

TEST(FileIo, FieldAndLineSplitting) {
    EXPECT_EQ(split_fields("a,,b,"), (std::vector<std::string>{"a", "", "b", ""}));
    EXPECT_EQ(split_lines("x\ny\n"), (std::vector<std::string>{"x", "y"}));
}
