#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "wavesr/error.hpp"
#include "wavesr/model.hpp"

namespace wsr {

namespace fs = std::filesystem;

namespace {

constexpr const char* kExtraPrefix = "meta.";

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
public:
    Reader(std::string buf, std::string source) : buf_(std::move(buf)), source_(std::move(source)) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[at_ + i])) << (8 * i);
        at_ += 4;
        return v;
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = buf_.substr(at_, n);
        at_ += n;
        return s;
    }
    std::size_t offset() const { return at_; }
    bool done() const { return at_ == buf_.size(); }
    [[noreturn]] void fail(const std::string& msg, std::size_t at) const { throw FormatError(source_ + ": " + msg, at); }

private:
    void need(std::size_t n, const char* what) const {
        if (buf_.size() - at_ < n) fail(std::string("truncated while reading ") + what, buf_.size());
    }
    std::string buf_, source_;
    std::size_t at_ = 0;
};

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
    std::string text = ck.config.to_text();
    for (const auto& [k, v] : ck.extra) text += kExtraPrefix + k + " = " + v + "\n";
    std::string buf(kCheckpointMagic, 4);
    put_u32(buf, kCheckpointVersion);
    put_u32(buf, static_cast<std::uint32_t>(text.size()));
    buf += text;
    put_u32(buf, static_cast<std::uint32_t>(ck.tensors.size()));
    for (const auto& [name, t] : ck.tensors) {
        put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf += name;
        put_u32(buf, static_cast<std::uint32_t>(t.ndim()));
        for (int d : t.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
        for (float v : t.data()) put_u32(buf, std::bit_cast<std::uint32_t>(v));
    }
    // Write then rename so an interrupted save never leaves a torn checkpoint.
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw DataError("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'", 0);
    Reader r(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()), path.string());
    if (r.bytes(4, "magic") != std::string(kCheckpointMagic, 4)) r.fail("bad magic", 0);
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version), 4);
    const std::uint32_t text_len = r.u32("config length");
    const std::size_t text_at = r.offset();
    const std::string text = r.bytes(text_len, "config");

    Checkpoint ck;
    std::string config_text;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind(kExtraPrefix, 0) == 0) {
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) r.fail("malformed metadata line '" + line + "'", text_at);
            ck.extra[line.substr(5, eq - 5)] = line.substr(eq + 3);
        } else {
            config_text += line + "\n";
        }
    }
    try {
        ck.config = ModelConfig::from_text(config_text);
    } catch (const ConfigError& e) {
        r.fail(std::string("bad config block: ") + e.what(), text_at);
    }

    const std::uint32_t count = r.u32("tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.bytes(r.u32("name length"), "tensor name");
        const std::size_t shape_at = r.offset();
        const std::uint32_t ndim = r.u32("rank");
        if (ndim == 0 || ndim > 8) r.fail("tensor '" + name + "' has rank " + std::to_string(ndim), shape_at);
        Shape shape;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const std::uint32_t v = r.u32("dimension");
            if (v == 0 || v > (1u << 24)) r.fail("tensor '" + name + "' has an implausible dimension", shape_at);
            shape.push_back(static_cast<int>(v));
        }
        Tensor t(shape);
        for (float& v : t.mutable_data()) v = std::bit_cast<float>(r.u32("tensor data"));
        ck.tensors.emplace_back(name, std::move(t));
    }
    if (!r.done()) r.fail("trailing bytes", r.offset());
    return ck;
}

void load_parameters(Model& model, const Checkpoint& ck) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : ck.tensors) by_name[name] = &t;
    for (const auto& [name, p] : model.parameters()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("checkpoint lacks parameter '" + name + "'", 0);
        if (it->second->shape() != p.shape()) {
            throw FormatError("checkpoint parameter '" + name + "' has shape " + shape_str(it->second->shape()) +
                                  ", model expects " + shape_str(p.shape()),
                              0);
        }
        Tensor dst = p;
        auto src = it->second->data();
        std::copy(src.begin(), src.end(), dst.mutable_data().begin());
    }
}

}  // namespace wsr
