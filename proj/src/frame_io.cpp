#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "wavesr/data.hpp"
#include "wavesr/error.hpp"
#include "wavesr/random.hpp"

namespace wsr {

namespace fs = std::filesystem;

namespace {

struct PlaneDesc {
    const char* name;
    int channels;
};

// Normative plane order.
constexpr PlaneDesc kPlanes[] = {{"hdr", 3},   {"albedo", 3}, {"normal", 3}, {"depth", 1},
                                 {"rough", 1}, {"metal", 1},  {"mv", 2}};
constexpr std::size_t kPlaneNameBytes = 16;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

template <class Frame>
auto& plane_of(Frame& f, int k) {
    switch (k) {
        case 0: return f.hdr;
        case 1: return f.gbuffer.albedo;
        case 2: return f.gbuffer.normal;
        case 3: return f.gbuffer.depth;
        case 4: return f.gbuffer.roughness;
        case 5: return f.gbuffer.metallic;
        default: return f.mv.mv;
    }
}

}  // namespace

std::size_t frame_file_size(int height, int width) {
    std::size_t total = kFrameHeaderBytes;
    for (const PlaneDesc& p : kPlanes) {
        total += kPlaneHeaderBytes + 4u * static_cast<std::size_t>(p.channels) * height * width;
    }
    return total;
}

void write_frame(const fs::path& path, const FrameRecord& frame) {
    const int H = frame.hdr.dim(1), W = frame.hdr.dim(2);
    std::string buf;
    buf.reserve(frame_file_size(H, W));
    buf.append(kFrameMagic, 4);
    put_u32(buf, kFrameVersion);
    put_u32(buf, static_cast<std::uint32_t>(H));
    put_u32(buf, static_cast<std::uint32_t>(W));
    put_u32(buf, static_cast<std::uint32_t>(std::size(kPlanes)));
    for (int k = 0; k < static_cast<int>(std::size(kPlanes)); ++k) {
        const Tensor& t = plane_of(frame, k);
        if (t.shape() != Shape{kPlanes[k].channels, H, W}) {
            throw ShapeError(std::string("write_frame: plane '") + kPlanes[k].name + "' has shape " +
                             shape_str(t.shape()));
        }
        std::string name(kPlanes[k].name);
        name.resize(kPlaneNameBytes, ' ');
        buf += name;
        put_u32(buf, static_cast<std::uint32_t>(kPlanes[k].channels));
        for (float v : t.data()) put_u32(buf, std::bit_cast<std::uint32_t>(v));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

FrameRecord read_frame(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'", 0);
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto need = [&](std::size_t at, std::size_t n, const char* what) {
        if (buf.size() < at + n) {
            throw FormatError(path.string() + ": truncated while reading " + what, buf.size());
        }
    };
    need(0, kFrameHeaderBytes, "header");
    if (std::memcmp(buf.data(), kFrameMagic, 4) != 0) throw FormatError(path.string() + ": bad magic", 0);
    const std::uint32_t version = get_u32(buf, 4);
    if (version != kFrameVersion) {
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version), 4);
    }
    const std::uint32_t H = get_u32(buf, 8), W = get_u32(buf, 12), planes = get_u32(buf, 16);
    if (H == 0 || W == 0 || H > (1u << 15) || W > (1u << 15)) {
        throw FormatError(path.string() + ": implausible frame size", 8);
    }
    if (planes != std::size(kPlanes)) {
        throw FormatError(path.string() + ": expected " + std::to_string(std::size(kPlanes)) + " planes, found " +
                              std::to_string(planes),
                          16);
    }
    FrameRecord f;
    std::size_t at = kFrameHeaderBytes;
    for (int k = 0; k < static_cast<int>(planes); ++k) {
        need(at, kPlaneHeaderBytes, "plane header");
        std::string name = buf.substr(at, kPlaneNameBytes);
        name.erase(name.find_last_not_of(' ') + 1);
        if (name != kPlanes[k].name) {
            throw FormatError(path.string() + ": expected plane '" + kPlanes[k].name + "', found '" + name + "'", at);
        }
        const std::uint32_t channels = get_u32(buf, at + kPlaneNameBytes);
        if (channels != static_cast<std::uint32_t>(kPlanes[k].channels)) {
            throw FormatError(path.string() + ": plane '" + name + "' has " + std::to_string(channels) + " channels",
                              at + kPlaneNameBytes);
        }
        at += kPlaneHeaderBytes;
        const std::size_t n = static_cast<std::size_t>(channels) * H * W;
        need(at, 4 * n, "plane data");
        Tensor t(Shape{static_cast<int>(channels), static_cast<int>(H), static_cast<int>(W)});
        auto d = t.mutable_data();
        for (std::size_t i = 0; i < n; ++i) d[i] = std::bit_cast<float>(get_u32(buf, at + 4 * i));
        at += 4 * n;
        plane_of(f, k) = std::move(t);
    }
    if (at != buf.size()) throw FormatError(path.string() + ": trailing bytes after last plane", at);
    return f;
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

std::vector<std::string> SplitManifest::scenes_in(Split s) const {
    std::vector<std::string> out;
    for (const auto& [id, split] : scenes)
        if (split == s) out.push_back(id);
    return out;
}

SplitManifest make_split(const std::vector<std::string>& scene_ids, std::uint64_t seed, double train_ratio,
                         double val_ratio) {
    if (train_ratio < 0 || val_ratio < 0 || train_ratio + val_ratio > 1.0) {
        throw ConfigError("split ratios must be non-negative and sum to at most 1");
    }
    std::vector<std::string> order = scene_ids;
    std::sort(order.begin(), order.end());
    std::mt19937_64 rng(derive_seed(seed, {0x5b117}));
    std::shuffle(order.begin(), order.end(), rng);
    const int n = static_cast<int>(order.size());
    int n_train = static_cast<int>(std::lround(train_ratio * n));
    int n_val = static_cast<int>(std::lround(val_ratio * n));
    // Keep a held-out scene whenever there is more than one.
    if (n >= 2 && n_train + n_val >= n && train_ratio + val_ratio < 1.0) {
        if (n_val > 0) --n_val; else --n_train;
    }
    n_train = std::clamp(n_train, 0, n);
    n_val = std::clamp(n_val, 0, n - n_train);
    SplitManifest m;
    m.seed = seed;
    for (int i = 0; i < n; ++i) {
        const Split s = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
        m.scenes.emplace_back(order[i], s);
    }
    std::sort(m.scenes.begin(), m.scenes.end());
    return m;
}

void write_manifest(const fs::path& path, const SplitManifest& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << "# split seed=" << m.seed << "\n";
    for (const auto& [id, split] : m.scenes) out << to_string(split) << ' ' << id << '\n';
}

SplitManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open split manifest '" + path.string() + "'", 0);
    SplitManifest m;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("seed=");
            if (pos != std::string::npos) m.seed = std::stoull(line.substr(pos + 5));
            continue;
        }
        std::istringstream ls(line);
        std::string split, id;
        ls >> split >> id;
        Split s;
        if (split == "train") s = Split::train;
        else if (split == "val") s = Split::val;
        else if (split == "test") s = Split::test;
        else throw FormatError(path.string() + ": unknown split '" + split + "'", line_start);
        if (id.empty()) throw FormatError(path.string() + ": missing scene id", line_start);
        m.scenes.emplace_back(id, s);
    }
    return m;
}

std::string scene_dir_name(int scene) {
    std::ostringstream s;
    s << "scene_" << std::setw(3) << std::setfill('0') << scene;
    return s.str();
}

std::string frame_file_name(int frame) {
    std::ostringstream s;
    s << "frame_" << std::setw(5) << std::setfill('0') << frame << ".wsrf";
    return s.str();
}

DatasetSummary generate_dataset(const fs::path& root, const DatasetSpec& spec) {
    if (spec.num_scenes < 1) throw ConfigError("dataset needs at least one scene");
    spec.scene.validate();
    fs::create_directories(root);
    DatasetSummary summary;
    std::vector<std::string> ids;
    for (int k = 0; k < spec.num_scenes; ++k) {
        SceneSpec scene = spec.scene;
        scene.seed = derive_seed(spec.seed, {static_cast<std::uint64_t>(k)});
        const std::string id = scene_dir_name(k);
        const auto frames = generate_scene(scene, id);
        fs::create_directories(root / id);
        for (const FrameRecord& f : frames) write_frame(root / id / frame_file_name(f.frame_index), f);
        ids.push_back(id);
        ++summary.scenes;
        summary.frames += static_cast<int>(frames.size());
    }
    write_manifest(root / kManifestName, make_split(ids, spec.seed, spec.train_ratio, spec.val_ratio));
    return summary;
}

std::vector<FrameRecord> load_scene(const fs::path& root, const std::string& scene_id) {
    const fs::path dir = root / scene_id;
    if (!fs::is_directory(dir)) throw FormatError("missing scene directory '" + dir.string() + "'", 0);
    std::vector<FrameRecord> frames;
    for (int t = 0;; ++t) {
        const fs::path p = dir / frame_file_name(t);
        if (!fs::exists(p)) break;
        FrameRecord f = read_frame(p);
        f.frame_index = t;
        f.scene_id = scene_id;
        frames.push_back(std::move(f));
    }
    if (frames.size() < 2) throw FormatError("scene '" + scene_id + "' has fewer than 2 frames", 0);
    return frames;
}

}  // namespace wsr
