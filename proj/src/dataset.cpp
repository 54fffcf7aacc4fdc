#include "tryon/dataset.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>
#include <variant>

#include "tryon/image_io.hpp"

namespace tryon {

namespace fs = std::filesystem;

void validate_record(const SampleRecord& r, const LabelPalette& palette) {
    const auto res = r.resolution();
    auto check = [&](const torch::Tensor& t, int64_t channels, const char* name) {
        if (!t.defined() || t.dim() != 3 || t.size(0) != channels || t.size(1) != res.height ||
            t.size(2) != res.width) {
            throw ContractError(std::string("record ") + r.pair_id + ": field " + name + " has the wrong shape");
        }
        if (!torch::isfinite(t).all().item<bool>()) {
            throw ContractError(std::string("record ") + r.pair_id + ": field " + name + " is not finite");
        }
    };
    const int64_t cseg = palette.num_channels();
    check(r.person, 3, "person");
    check(r.clothes, 3, "clothes");
    check(r.clothes_mask, 1, "clothes_mask");
    check(r.pose, 3, "pose");
    check(r.parse, cseg, "parse");
    check(r.agnostic_image, 3, "agnostic_image");
    check(r.agnostic_parse, cseg, "agnostic_parse");
    for (const auto* img : {&r.person, &r.clothes, &r.agnostic_image, &r.pose}) {
        if ((img->abs() > 1).any().item<bool>()) throw ContractError("record " + r.pair_id + ": image outside [-1, 1]");
    }
    if ((r.clothes_mask < 0).any().item<bool>() || (r.clothes_mask > 1).any().item<bool>()) {
        throw ContractError("record " + r.pair_id + ": mask outside [0, 1]");
    }
    if (!is_onehot(r.parse.unsqueeze(0)) || !is_onehot(r.agnostic_parse.unsqueeze(0))) {
        throw ContractError("record " + r.pair_id + ": parse maps must be one-hot");
    }
    auto [ia, sa] = make_agnostic(r.person, r.parse, palette);
    if (!torch::equal(ia, r.agnostic_image) || !torch::equal(sa, r.agnostic_parse)) {
        throw ContractError("record " + r.pair_id + ": agnostic pair inconsistent with person/parse");
    }
}

std::pair<torch::Tensor, torch::Tensor> make_agnostic(const torch::Tensor& person, const torch::Tensor& parse,
                                                      const LabelPalette& palette) {
    const bool single = person.dim() == 3;
    auto img = single ? person.unsqueeze(0) : person;
    auto seg = single ? parse.unsqueeze(0) : parse;
    require_rank(img, 4, "make_agnostic(person)");
    require_rank(seg, 4, "make_agnostic(parse)");
    require_same_spatial(img, seg, "make_agnostic");
    require(seg.size(1) == palette.num_channels(), "make_agnostic: parse channel count differs from palette");

    auto region = seg.select(1, palette.clothing_channel()).clone();
    for (int c : palette.body_part_channels()) region = region + seg.select(1, c);
    auto blank = (region > 0.5).unsqueeze(1);  // [B, 1, H, W]

    auto agnostic_image = img.masked_fill(blank, 0.0);
    auto agnostic_onehot = torch::zeros_like(seg);
    agnostic_onehot.select(1, palette.agnostic_channel()).fill_(1);
    auto agnostic_parse = torch::where(blank, agnostic_onehot, seg);
    if (single) return {agnostic_image.squeeze(0), agnostic_parse.squeeze(0)};
    return {agnostic_image, agnostic_parse};
}

torch::Tensor clothing_region(const torch::Tensor& parse, const LabelPalette& palette) {
    const int64_t channel_dim = parse.dim() == 4 ? 1 : 0;
    return parse.narrow(channel_dim, palette.clothing_channel(), 1);
}

SampleRecord resize_record(const SampleRecord& r, Resolution to, const LabelPalette& palette) {
    if (r.resolution() == to) return r;
    auto img = [&](const torch::Tensor& t) { return resize_bicubic(t.unsqueeze(0), to).clamp(-1, 1).squeeze(0); };
    SampleRecord out;
    out.pair_id = r.pair_id;
    out.person = img(r.person);
    out.clothes = img(r.clothes);
    out.pose = img(r.pose);
    out.clothes_mask = (resize_bicubic(r.clothes_mask.unsqueeze(0), to) >= 0.5).to(r.clothes_mask.dtype()).squeeze(0);
    out.parse = resize_onehot(r.parse.unsqueeze(0), to).squeeze(0);
    std::tie(out.agnostic_image, out.agnostic_parse) = make_agnostic(out.person, out.parse, palette);
    return out;
}

Batch collate(const std::vector<SampleRecord>& records, const std::vector<int64_t>& indices) {
    require(!indices.empty(), "collate: empty batch");
    std::vector<torch::Tensor> person, clothes, mask, pose, parse, ia, sa;
    for (auto i : indices) {
        const auto& r = records.at(static_cast<std::size_t>(i));
        person.push_back(r.person);
        clothes.push_back(r.clothes);
        mask.push_back(r.clothes_mask);
        pose.push_back(r.pose);
        parse.push_back(r.parse);
        ia.push_back(r.agnostic_image);
        sa.push_back(r.agnostic_parse);
    }
    return {torch::stack(person), torch::stack(clothes), torch::stack(mask), torch::stack(pose),
            torch::stack(parse),  torch::stack(ia),      torch::stack(sa)};
}

Batch collate(const std::vector<SampleRecord>& records) {
    std::vector<int64_t> all(records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int64_t>(i);
    return collate(records, all);
}

// ---------------------------------------------------------------- loading

namespace {

struct PairLine {
    std::string person;
    std::string cloth;
};

std::vector<PairLine> read_pairs(const fs::path& pairs_file) {
    std::ifstream in(pairs_file);
    if (!in) throw std::runtime_error("cannot open pairs file " + pairs_file.string());
    std::vector<PairLine> pairs;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        PairLine p;
        if (!(ls >> p.person)) continue;
        if (!(ls >> p.cloth)) throw std::runtime_error("pairs file line without a cloth name: '" + line + "'");
        pairs.push_back(p);
    }
    return pairs;
}

fs::path locate(const fs::path& dir, const std::string& name) {
    if (fs::path(name).has_extension() && fs::exists(dir / name)) return dir / name;
    const auto stem = fs::path(name).stem().string();
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        auto candidate = dir / (stem + ext);
        if (fs::exists(candidate)) return candidate;
    }
    return dir / name;
}

fs::path require_file(const fs::path& dir, const std::string& name) {
    auto path = locate(dir, name);
    if (!fs::exists(path)) throw ImageIOError("missing file " + path.string());
    return path;
}

SampleRecord load_one(const fs::path& root, const PairLine& pair, const LabelPalette& palette, Resolution res) {
    auto image = [&](const fs::path& p) {
        return resize_bicubic(raster_to_image(read_image(p)).unsqueeze(0), res).clamp(-1, 1).squeeze(0);
    };
    SampleRecord r;
    r.pair_id = fs::path(pair.person).stem().string() + ":" + fs::path(pair.cloth).stem().string();
    r.person = image(require_file(root / "person", pair.person));
    r.clothes = image(require_file(root / "cloth", pair.cloth));
    r.pose = image(require_file(root / "pose", pair.person));
    auto mask = raster_to_mask(read_image(require_file(root / "cloth_mask", pair.cloth)));
    r.clothes_mask = (resize_bicubic(mask.unsqueeze(0), res) >= 0.5).to(torch::kFloat32).squeeze(0);

    const auto parse_path = require_file(root / "parse", fs::path(pair.person).stem().string() + ".png");
    const auto raster = read_image(parse_path);
    if (raster.channels != 1) throw ImageIOError("parse map must be single-channel: " + parse_path.string());
    for (auto v : raster.pixels) palette.require(v);
    auto labels = torch::from_blob(const_cast<std::uint8_t*>(raster.pixels.data()), {1, raster.height, raster.width},
                                   torch::kUInt8)
                      .to(torch::kLong);
    r.parse = resize_onehot(labels_to_onehot(labels, palette.num_channels()), res).squeeze(0);
    std::tie(r.agnostic_image, r.agnostic_parse) = make_agnostic(r.person, r.parse, palette);
    return r;
}

}  // namespace

LoadResult load_dataset(const fs::path& root, const fs::path& pairs_file, const LabelPalette& palette,
                        Resolution resolution, LoadOptions options) {
    const auto pairs = read_pairs(pairs_file);
    using Slot = std::variant<std::monostate, SampleRecord, LoadError, std::exception_ptr>;
    std::vector<Slot> slots(pairs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < pairs.size(); i = next++) {
            try {
                slots[i] = load_one(root, pairs[i], palette, resolution);
            } catch (const ImageIOError& e) {
                slots[i] = LoadError{pairs[i].person + " " + pairs[i].cloth, e.what()};
            } catch (...) {
                slots[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(pairs.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    LoadResult result;
    for (auto& slot : slots) {
        if (auto* err = std::get_if<std::exception_ptr>(&slot)) std::rethrow_exception(*err);
        if (auto* rec = std::get_if<SampleRecord>(&slot)) result.records.push_back(std::move(*rec));
        if (auto* e = std::get_if<LoadError>(&slot)) result.errors.push_back(std::move(*e));
    }
    return result;
}

void write_dataset(const fs::path& root, const std::vector<SampleRecord>& records, const LabelPalette& palette,
                   const fs::path& pairs_file, std::size_t first_index) {
    for (const char* dir : {"person", "cloth", "cloth_mask", "parse", "pose"}) fs::create_directories(root / dir);
    std::vector<std::array<std::uint8_t, 3>> colors;
    for (int id = 0; id < palette.num_channels(); ++id) colors.push_back(palette.color_of(id));

    std::ofstream pairs(pairs_file);
    if (!pairs) throw std::runtime_error("cannot write pairs file " + pairs_file.string());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        char name[32];
        std::snprintf(name, sizeof(name), "%06zu", first_index + i);
        const std::string person = std::string(name) + "_00";
        const std::string cloth = std::string(name) + "_00";
        write_png(root / "person" / (person + ".png"), image_to_raster(r.person));
        write_png(root / "cloth" / (cloth + ".png"), image_to_raster(r.clothes));
        write_png(root / "cloth_mask" / (cloth + ".png"), mask_to_raster(r.clothes_mask));
        write_png(root / "pose" / (person + ".png"), image_to_raster(r.pose));
        auto labels = onehot_to_labels(r.parse.unsqueeze(0)).squeeze(0).to(torch::kUInt8).contiguous();
        Raster idx{static_cast<int>(labels.size(1)), static_cast<int>(labels.size(0)), 1, {}};
        idx.pixels.assign(labels.data_ptr<std::uint8_t>(), labels.data_ptr<std::uint8_t>() + labels.numel());
        write_indexed_png(root / "parse" / (person + ".png"), idx, colors);
        pairs << person << ".png " << cloth << ".png\n";
    }
}

}  // namespace tryon
