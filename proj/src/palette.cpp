#include "tryon/palette.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace tryon {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

bool parse_int(const std::string& s, int& out) {
    try {
        std::size_t pos = 0;
        out = std::stoi(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

LabelPalette::LabelPalette(std::vector<Label> labels, int clothing_channel, std::set<int> body_part_channels,
                           int agnostic_channel)
    : labels_(std::move(labels)),
      clothing_(clothing_channel),
      body_parts_(std::move(body_part_channels)),
      agnostic_(agnostic_channel) {
    std::sort(labels_.begin(), labels_.end(), [](const Label& a, const Label& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i].id != static_cast<int>(i)) {
            throw PaletteError("label ids must be unique and contiguous from 0 (missing or duplicate id " +
                               std::to_string(i) + ")");
        }
    }
    const int n = num_channels();
    if (clothing_ < 0 || clothing_ >= n) throw PaletteError("clothing_channel out of range");
    if (agnostic_ < 0 || agnostic_ >= n) throw PaletteError("agnostic_channel out of range");
    for (int c : body_parts_) {
        if (c < 0 || c >= n) throw PaletteError("body part channel " + std::to_string(c) + " out of range");
    }
    if (body_parts_.count(clothing_)) throw PaletteError("clothing_channel may not be a body part channel");
    if (body_parts_.count(agnostic_) || agnostic_ == clothing_) {
        throw PaletteError("agnostic_channel must differ from clothing and body part channels");
    }
}

LabelPalette LabelPalette::default_palette() {
    return LabelPalette({{0, "background"},
                         {1, "face-hair"},
                         {2, "torso-clothes"},
                         {3, "bottom"},
                         {4, "left-arm"},
                         {5, "right-arm"},
                         {6, "agnostic"}},
                        2, {1, 4, 5}, 6);
}

LabelPalette LabelPalette::parse(const std::string& text) {
    std::vector<Label> labels;
    std::string clothing, body_parts, agnostic;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw PaletteError("palette line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "clothing_channel") {
            clothing = value;
        } else if (key == "body_part_channels") {
            body_parts = value;
        } else if (key == "agnostic_channel") {
            agnostic = value;
        } else {
            int id = 0;
            if (!parse_int(value, id)) {
                throw PaletteError("palette line " + std::to_string(lineno) + ": label id is not an integer");
            }
            labels.push_back({id, key});
        }
    }

    auto resolve = [&labels](const std::string& token) {
        int id = 0;
        if (parse_int(token, id)) return id;
        for (const auto& l : labels) {
            if (l.name == token) return l.id;
        }
        throw PaletteError("unknown label name '" + token + "'");
    };

    if (clothing.empty()) throw PaletteError("palette is missing clothing_channel");
    std::set<int> parts;
    for (const auto& token : split(body_parts, ',')) parts.insert(resolve(token));
    const int agnostic_id = agnostic.empty() ? resolve("agnostic") : resolve(agnostic);
    return LabelPalette(std::move(labels), resolve(clothing), std::move(parts), agnostic_id);
}

LabelPalette LabelPalette::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PaletteError("cannot open palette file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string LabelPalette::serialize() const {
    std::ostringstream out;
    for (const auto& l : labels_) out << l.name << " = " << l.id << "\n";
    out << "clothing_channel = " << clothing_ << "\n";
    out << "body_part_channels = ";
    bool first = true;
    for (int c : body_parts_) {
        out << (first ? "" : ",") << c;
        first = false;
    }
    out << "\nagnostic_channel = " << agnostic_ << "\n";
    return out.str();
}

void LabelPalette::require(int id) const {
    if (!contains(id)) {
        throw PaletteError("label id " + std::to_string(id) + " is not in the palette (" +
                           std::to_string(num_channels()) + " labels)");
    }
}

int LabelPalette::id_of(const std::string& name) const {
    for (const auto& l : labels_) {
        if (l.name == name) return l.id;
    }
    throw PaletteError("unknown label name '" + name + "'");
}

const std::string& LabelPalette::name_of(int id) const {
    require(id);
    return labels_[static_cast<std::size_t>(id)].name;
}

std::array<std::uint8_t, 3> LabelPalette::color_of(int id) const {
    static constexpr std::array<std::array<std::uint8_t, 3>, 12> kColors{{{0, 0, 0},
                                                                        {254, 85, 0},
                                                                        {0, 85, 255},
                                                                        {85, 51, 0},
                                                                        {51, 170, 221},
                                                                        {0, 255, 255},
                                                                        {128, 128, 128},
                                                                        {170, 255, 85},
                                                                        {255, 255, 0},
                                                                        {255, 170, 0},
                                                                        {85, 255, 170},
                                                                        {0, 0, 255}}};
    return kColors[static_cast<std::size_t>(id) % kColors.size()];
}

bool LabelPalette::operator==(const LabelPalette& other) const {
    if (labels_.size() != other.labels_.size()) return false;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i].name != other.labels_[i].name) return false;
    }
    return clothing_ == other.clothing_ && body_parts_ == other.body_parts_ && agnostic_ == other.agnostic_;
}

}  // namespace tryon
