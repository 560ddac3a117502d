#include "vfm/checkpoint.hpp"

#include "vfm/errors.hpp"

#include <bit>
#include <cstring>
#include <map>

namespace vfm {

namespace {

constexpr char kMagic[8] = {'V', 'F', 'M', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void bytes(std::string_view s) { out_.append(s); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void text(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::string_view bytes(std::size_t n) {
        if (in_.size() - pos_ < n) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
    std::uint32_t u32() {
        auto b = bytes(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        auto b = bytes(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string text() { return std::string(bytes(u32())); }
    bool done() const { return pos_ == in_.size(); }

private:
    std::string_view in_;
    std::size_t pos_ = 0;
};

void write_stats(Writer& w, const NormStats& s) {
    w.u8(s.fitted ? 1 : 0);
    w.f64(s.std_floor);
    for (const auto& f : s.design) {
        w.f64(f.mean);
        w.f64(f.std);
    }
    for (const auto& f : s.ops) {
        w.f64(f.mean);
        w.f64(f.std);
    }
    for (const auto& f : s.targets) {
        w.f64(f.mean);
        w.f64(f.std);
    }
}

NormStats read_stats(Reader& r) {
    NormStats s;
    s.fitted = r.u8() != 0;
    s.std_floor = r.f64();
    auto fill = [&](auto& arr) {
        for (auto& f : arr) {
            f.mean = r.f64();
            f.std = r.f64();
        }
    };
    fill(s.design);
    fill(s.ops);
    fill(s.targets);
    return s;
}

} // namespace

std::string serialize_checkpoint(Model& model, const NormStats& stats, const KeyValueMap& metadata) {
    Writer w;
    w.bytes(std::string_view(kMagic, sizeof(kMagic)));
    w.u32(kVersion);
    w.text(to_key_value_text(model.config().to_key_values()));
    write_stats(w, stats);
    w.text(to_key_value_text(metadata));
    const ParamList params = model.parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const Param* p : params) {
        w.text(p->name);
        w.u32(static_cast<std::uint32_t>(p->value.rows()));
        w.u32(static_cast<std::uint32_t>(p->value.cols()));
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) w.f64(p->value(i, j));
        }
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.bytes(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
        throw DataError("not a checkpoint file (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    const ModelConfig cfg = ModelConfig::from_key_values(parse_key_values(r.text()));
    NormStats stats = read_stats(r);
    KeyValueMap metadata = parse_key_values(r.text());

    Checkpoint ck{Model(cfg), std::move(stats), std::move(metadata)};
    std::map<std::string, Param*> by_name;
    for (Param* p : ck.model.parameters()) by_name[p->name] = p;

    const std::uint32_t count = r.u32();
    if (count != by_name.size()) {
        throw DataError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                        std::to_string(by_name.size()));
    }
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::string name = r.text();
        const auto rows = static_cast<Eigen::Index>(r.u32());
        const auto cols = static_cast<Eigen::Index>(r.u32());
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError("checkpoint tensor '" + name + "' is not part of the model");
        Mat& v = it->second->value;
        if (v.rows() != rows || v.cols() != cols) {
            throw DataError("checkpoint tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", model expects " + std::to_string(v.rows()) + "x" +
                            std::to_string(v.cols()));
        }
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) v(i, j) = r.f64();
        }
    }
    if (!r.done()) throw DataError("trailing bytes after checkpoint tensors");
    return ck;
}

void save_checkpoint(const std::string& path, Model& model, const NormStats& stats, const KeyValueMap& metadata) {
    write_file(path, serialize_checkpoint(model, stats, metadata));
}

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

} // namespace vfm
