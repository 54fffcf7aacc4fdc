#include "../support/doctest_torch.hpp"

#include <filesystem>
#include <fstream>

#include "tryon/dataset.hpp"
#include "tryon/image_io.hpp"

using namespace tryon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tryon_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("data-model") {
    TEST_CASE("default palette layout") {
        const auto p = LabelPalette::default_palette();
        CHECK(p.num_channels() == 7);
        CHECK(p.clothing_channel() == 2);
        CHECK((p.body_part_channels() == std::set<int>{1, 4, 5}));
        CHECK(p.agnostic_channel() == 6);
        CHECK_FALSE(p.is_body_part(p.clothing_channel()));
    }

    TEST_CASE("palette text round trip and validation") {
        const auto p = LabelPalette::default_palette();
        CHECK(LabelPalette::parse(p.serialize()) == p);
        const auto q = LabelPalette::parse(
            "# minimal\nbg = 0\nshirt = 1\narm = 2\nagnostic = 3\nclothing_channel = shirt\nbody_part_channels = arm\n");
        CHECK(q.clothing_channel() == 1);
        CHECK(q.is_body_part(2));
        CHECK_THROWS_AS(LabelPalette::parse("a = 0\nb = 2\nagnostic = 3\nclothing_channel = 0\n"), PaletteError);
        CHECK_THROWS_AS(LabelPalette::parse("a = 0\nb = 1\nagnostic = 2\nclothing_channel = 1\nbody_part_channels = 1\n"),
                        PaletteError);
        CHECK_THROWS_AS(LabelPalette::parse("a = 0\nb = 1\nagnostic = 2\n"), PaletteError);
        CHECK_THROWS_AS(LabelPalette::parse("a = 0\nagnostic = 1\nclothing_channel = 5\n"), PaletteError);
    }

    TEST_CASE("one-hot round trip is the identity") {
        torch::manual_seed(3);
        const auto labels = torch::randint(0, 7, {2, 9, 5}, torch::kLong);
        const auto seg = labels_to_onehot(labels, 7);
        CHECK(is_onehot(seg));
        CHECK(torch::equal(onehot_to_labels(seg), labels));
        CHECK(torch::equal(labels_to_onehot(onehot_to_labels(seg), 7), seg));
    }

    TEST_CASE("argmax ties resolve to the lowest channel") {
        auto seg = torch::zeros({1, 3, 1, 1});
        seg[0][1][0][0] = 0.5;
        seg[0][2][0][0] = 0.5;
        CHECK(onehot_to_labels(seg).item<int64_t>() == 1);
    }

    TEST_CASE("make_agnostic identity, saturation and 10x10 block") {
        const auto palette = LabelPalette::default_palette();
        torch::manual_seed(1);
        const auto person = torch::rand({3, 20, 16}) * 2 - 1;

        auto labels = torch::zeros({20, 16}, torch::kLong);
        labels.narrow(0, 15, 5).fill_(3);  // bottom only
        auto [ia, sa] = make_agnostic(person, labels_to_onehot(labels.unsqueeze(0), 7).squeeze(0), palette);
        CHECK(torch::equal(ia, person));
        CHECK(sa[palette.agnostic_channel()].sum().item<double>() == 0);

        auto all_cloth = torch::full({20, 16}, 2, torch::kLong);
        std::tie(ia, sa) = make_agnostic(person, labels_to_onehot(all_cloth.unsqueeze(0), 7).squeeze(0), palette);
        CHECK(ia.abs().sum().item<double>() == 0);
        CHECK(sa[palette.agnostic_channel()].sum().item<double>() == 20 * 16);

        auto block = torch::zeros({20, 16}, torch::kLong);
        block.narrow(0, 4, 10).narrow(1, 3, 10).fill_(2);
        const auto seg = labels_to_onehot(block.unsqueeze(0), 7).squeeze(0);
        std::tie(ia, sa) = make_agnostic(person, seg, palette);
        // Direct scan: a pixel is gray when all three channels are exactly 0.
        auto acc = ia.accessor<float, 3>();
        int gray = 0, changed = 0;
        auto pa = person.accessor<float, 3>();
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 16; ++x) {
                const bool g = acc[0][y][x] == 0 && acc[1][y][x] == 0 && acc[2][y][x] == 0;
                gray += g;
                for (int c = 0; c < 3; ++c) changed += acc[c][y][x] != pa[c][y][x];
            }
        CHECK(gray == 100);
        CHECK(changed <= 300);

        SUBCASE("idempotent") {
            auto [ia2, sa2] = make_agnostic(ia, sa, palette);
            CHECK(torch::equal(ia2, ia));
            CHECK(torch::equal(sa2, sa));
        }
    }

    TEST_CASE("synthetic generator: determinism, size and invariants") {
        const auto palette = LabelPalette::default_palette();
        CHECK((generate_synthetic_dataset(5, 0, {64, 48}, palette).records.empty()));
        const auto a = generate_synthetic_dataset(5, 12, {64, 48}, palette);
        const auto b = generate_synthetic_dataset(5, 12, {64, 48}, palette);
        REQUIRE(a.records.size() == 12);
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            const auto& r = a.records[i];
            CHECK(torch::equal(r.person, b.records[i].person));
            CHECK(torch::equal(r.clothes, b.records[i].clothes));
            CHECK(torch::equal(r.parse, b.records[i].parse));
            CHECK(torch::equal(r.pose, b.records[i].pose));
            CHECK_NOTHROW(validate_record(r, palette));
            CHECK((r.resolution() == Resolution{64, 48}));
        }
        const auto c = generate_synthetic_dataset(6, 12, {64, 48}, palette);
        CHECK_FALSE(torch::equal(a.records[0].person, c.records[0].person));
        // Record i depends only on (seed, i).
        const auto prefix = generate_synthetic_dataset(5, 3, {64, 48}, palette);
        CHECK(torch::equal(prefix.records[2].person, a.records[2].person));
    }

    TEST_CASE("synthetic generator: occlusion probability 1 puts an arm inside the garment box") {
        const auto palette = LabelPalette::default_palette();
        SynthOptions o;
        o.occlusion_probability = 1.0;
        const auto data = generate_synthetic_dataset(11, 40, {64, 48}, palette, o);
        for (std::size_t i = 0; i < data.records.size(); ++i) {
            const auto labels = onehot_to_labels(data.records[i].parse.unsqueeze(0)).squeeze(0);
            auto la = labels.accessor<int64_t, 2>();
            int y0 = 1 << 30, y1 = -1, x0 = 1 << 30, x1 = -1;
            for (int y = 0; y < labels.size(0); ++y)
                for (int x = 0; x < labels.size(1); ++x)
                    if (la[y][x] == palette.clothing_channel()) {
                        y0 = std::min(y0, y), y1 = std::max(y1, y), x0 = std::min(x0, x), x1 = std::max(x1, x);
                    }
            int arm_in_box = 0;
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) arm_in_box += la[y][x] == 4 || la[y][x] == 5;
            CHECK_MESSAGE(arm_in_box >= 1, "record " << i);
            CHECK(data.meta[i].occluded);
        }
    }

    TEST_CASE("fuzz: synthetic records satisfy type invariants at several resolutions") {
        const auto palette = LabelPalette::default_palette();
        for (Resolution res : {Resolution{32, 24}, Resolution{64, 48}, Resolution{128, 96}}) {
            const auto data = generate_synthetic_dataset(21, 6, res, palette);
            for (const auto& r : data.records) {
                CHECK_NOTHROW(validate_record(r, palette));
                CHECK(r.person.abs().max().item<double>() <= 1.0);
                CHECK(((r.clothes_mask == 0) | (r.clothes_mask == 1)).all().item<bool>());
            }
        }
    }

    TEST_CASE("resize_record keeps invariants") {
        const auto palette = LabelPalette::default_palette();
        const auto r = generate_synthetic_dataset(2, 1, {128, 96}, palette).records[0];
        const auto s = resize_record(r, {64, 48}, palette);
        CHECK((s.resolution() == Resolution{64, 48}));
        CHECK_NOTHROW(validate_record(s, palette));
    }

    TEST_CASE("load_dataset: round trip, empty pairs, missing file, unknown label") {
        const auto palette = LabelPalette::default_palette();
        const auto root = scratch("load");
        const auto data = generate_synthetic_dataset(9, 4, {64, 48}, palette);
        write_dataset(root, data.records, palette, root / "pairs.txt");

        auto loaded = load_dataset(root, root / "pairs.txt", palette, {64, 48});
        REQUIRE(loaded.records.size() == 4);
        CHECK(loaded.errors.empty());
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(torch::equal(loaded.records[i].parse, data.records[i].parse));
            CHECK(torch::equal(loaded.records[i].clothes_mask, data.records[i].clothes_mask));
            // 8-bit quantization of [-1, 1] images.
            CHECK((loaded.records[i].person - data.records[i].person).abs().max().item<double>() <= 1.0 / 127.5 + 1e-6);
        }

        SUBCASE("parallel loading keeps pairs-file order") {
            LoadOptions o;
            o.workers = 3;
            auto par = load_dataset(root, root / "pairs.txt", palette, {64, 48}, o);
            REQUIRE(par.records.size() == 4);
            for (std::size_t i = 0; i < 4; ++i) CHECK(par.records[i].pair_id == loaded.records[i].pair_id);
        }
        SUBCASE("empty pairs file") {
            std::ofstream(root / "empty.txt").close();
            auto e = load_dataset(root, root / "empty.txt", palette, {64, 48});
            CHECK(e.records.empty());
            CHECK(e.errors.empty());
        }
        SUBCASE("one missing cloth image") {
            fs::remove(root / "cloth" / "000002_00.png");
            auto m = load_dataset(root, root / "pairs.txt", palette, {64, 48});
            CHECK(m.records.size() == 3);
            REQUIRE(m.errors.size() == 1);
            CHECK(m.errors[0].message.find("000002_00") != std::string::npos);
        }
        SUBCASE("label id 99") {
            Raster idx{48, 64, 1, std::vector<std::uint8_t>(48 * 64, 0)};
            idx.pixels[100] = 99;
            std::vector<std::array<std::uint8_t, 3>> colors(100, {0, 0, 0});
            write_indexed_png(root / "parse" / "000001_00.png", idx, colors);
            try {
                load_dataset(root, root / "pairs.txt", palette, {64, 48});
                FAIL("expected a palette error");
            } catch (const PaletteError& e) {
                CHECK(std::string(e.what()).find("99") != std::string::npos);
            }
        }
    }
}
