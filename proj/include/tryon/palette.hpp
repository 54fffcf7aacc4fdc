#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace tryon {

/// Raised for malformed palettes and for label ids a palette does not know.
class PaletteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Label {
    int id;
    std::string name;
};

/// Semantic label set of a parse map.
///
/// Label ids double as channel indices of the one-hot segmentation stack, so
/// they must be unique and contiguous from 0. One channel holds the upper
/// garment (the clothing channel); a set of channels marks body parts that may
/// occlude it; one channel marks the region blanked by the agnostic transform.
class LabelPalette {
public:
    LabelPalette(std::vector<Label> labels, int clothing_channel, std::set<int> body_part_channels,
                 int agnostic_channel);

    /// background, face/hair, torso-clothes, bottom, left-arm, right-arm, agnostic.
    static LabelPalette default_palette();

    /// Parses `name = id` lines plus `clothing_channel`, `body_part_channels`
    /// (comma separated) and optional `agnostic_channel`. Channel values may be
    /// label names or integer ids. `#` starts a comment.
    static LabelPalette parse(const std::string& text);
    static LabelPalette load(const std::filesystem::path& path);
    std::string serialize() const;

    int num_channels() const { return static_cast<int>(labels_.size()); }
    int clothing_channel() const { return clothing_; }
    int agnostic_channel() const { return agnostic_; }
    const std::set<int>& body_part_channels() const { return body_parts_; }
    const std::vector<Label>& labels() const { return labels_; }

    bool is_body_part(int channel) const { return body_parts_.count(channel) != 0; }
    bool contains(int id) const { return id >= 0 && id < num_channels(); }
    /// Throws PaletteError naming the id when it is not part of the palette.
    void require(int id) const;
    int id_of(const std::string& name) const;
    const std::string& name_of(int id) const;

    /// RGB colour used when rendering parse maps.
    std::array<std::uint8_t, 3> color_of(int id) const;

    bool operator==(const LabelPalette& other) const;

private:
    std::vector<Label> labels_;
    int clothing_;
    std::set<int> body_parts_;
    int agnostic_;
};

}  // namespace tryon
