#include "glyphda/archive.hpp"

#include <openssl/sha.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "glyphda/errors.hpp"

namespace glyphda {

static_assert(std::endian::native == std::endian::little, "archive encoding assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'G', 'D', 'A', 'R'};
constexpr std::uint32_t kVersion = 1;

std::uint8_t dtype_code(torch::Dtype dtype) {
    switch (dtype) {
    case torch::kFloat: return 0;
    case torch::kDouble: return 1;
    case torch::kLong: return 2;
    case torch::kUInt8: return 3;
    default: throw CheckpointError("archive: unsupported dtype " + std::string(c10::toString(dtype)));
    }
}

torch::Dtype code_dtype(std::uint8_t code) {
    switch (code) {
    case 0: return torch::kFloat;
    case 1: return torch::kDouble;
    case 2: return torch::kLong;
    case 3: return torch::kUInt8;
    default: throw CheckpointError("corrupt archive: unknown dtype code " + std::to_string(code));
    }
}

class Writer {
public:
    template <typename T>
    void pod(T v) {
        out_.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        out_ += s;
    }
    void raw(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
    std::string& buffer() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    Reader(const std::string& in, std::size_t end) : in_(in), end_(end) {}
    template <typename T>
    T pod() {
        T v;
        need(sizeof v);
        std::memcpy(&v, in_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    std::string str() {
        auto n = pod<std::uint32_t>();
        need(n);
        std::string s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    const char* raw(std::size_t n) {
        need(n);
        const char* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == end_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > end_) throw CheckpointError("corrupt archive: truncated");
    }
    const std::string& in_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

std::string sha256(const char* data, std::size_t n) {
    std::string out(SHA256_DIGEST_LENGTH, '\0');
    SHA256(reinterpret_cast<const unsigned char*>(data), n, reinterpret_cast<unsigned char*>(out.data()));
    return out;
}

std::string shape_string(torch::IntArrayRef sizes) {
    std::ostringstream s;
    s << '(';
    for (std::size_t i = 0; i < sizes.size(); ++i) s << (i ? "," : "") << sizes[i];
    s << ')';
    return s.str();
}

} // namespace

void Archive::add(std::string name, const torch::Tensor& array) {
    arrays.emplace_back(std::move(name), array.detach().cpu().contiguous().clone());
}

const torch::Tensor* Archive::find(const std::string& name) const {
    for (const auto& [n, t] : arrays)
        if (n == name) return &t;
    return nullptr;
}

const torch::Tensor& Archive::at(const std::string& name) const {
    if (const auto* t = find(name)) return *t;
    throw CheckpointError("missing array '" + name + "'");
}

std::string Archive::meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) throw CheckpointError("missing metadata '" + key + "'");
    return it->second;
}

std::string encode_archive(const Archive& archive) {
    Writer w;
    w.raw(kMagic, 4);
    w.pod(kVersion);
    w.pod(static_cast<std::uint32_t>(archive.metadata.size()));
    for (const auto& [k, v] : archive.metadata) {
        w.str(k);
        w.str(v);
    }
    w.pod(static_cast<std::uint32_t>(archive.arrays.size()));
    for (const auto& [name, tensor] : archive.arrays) {
        auto t = tensor.detach().cpu().contiguous();
        w.str(name);
        w.pod(dtype_code(t.scalar_type()));
        w.pod(static_cast<std::uint32_t>(t.dim()));
        for (auto d : t.sizes()) w.pod(static_cast<std::int64_t>(d));
        w.raw(t.data_ptr(), t.nbytes());
    }
    auto& buf = w.buffer();
    buf += sha256(buf.data(), buf.size());
    return buf;
}

Archive decode_archive(const std::string& bytes) {
    if (bytes.size() < 4 + 4 + SHA256_DIGEST_LENGTH || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CheckpointError("corrupt archive: bad magic");
    const std::size_t body = bytes.size() - SHA256_DIGEST_LENGTH;
    if (sha256(bytes.data(), body) != bytes.substr(body)) throw CheckpointError("corrupt archive: checksum mismatch");

    Reader r(bytes, body);
    r.raw(4);
    if (auto v = r.pod<std::uint32_t>(); v != kVersion)
        throw CheckpointError("unsupported archive version " + std::to_string(v));
    Archive a;
    const auto n_meta = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        auto k = r.str();
        a.metadata[k] = r.str();
    }
    const auto n_arrays = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_arrays; ++i) {
        auto name = r.str();
        auto dtype = code_dtype(r.pod<std::uint8_t>());
        const auto rank = r.pod<std::uint32_t>();
        if (rank > 8) throw CheckpointError("corrupt archive: rank " + std::to_string(rank) + " for '" + name + "'");
        std::vector<std::int64_t> dims(rank);
        for (auto& d : dims) {
            d = r.pod<std::int64_t>();
            if (d < 0) throw CheckpointError("corrupt archive: negative dimension in '" + name + "'");
        }
        auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
        std::memcpy(t.data_ptr(), r.raw(t.nbytes()), t.nbytes());
        a.arrays.emplace_back(std::move(name), std::move(t));
    }
    if (!r.done()) throw CheckpointError("corrupt archive: trailing bytes");
    return a;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
    const auto bytes = encode_archive(archive);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string() + " (disk full?)");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Archive read_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_archive(bytes);
}

void assign_arrays(const Archive& archive, const std::vector<std::pair<std::string, torch::Tensor>>& targets,
                   const std::string& prefix) {
    // Validate everything before mutating anything.
    for (const auto& [name, target] : targets) {
        const auto* src = archive.find(prefix + name);
        if (!src) throw CheckpointError("missing array '" + prefix + name + "'");
        if (src->sizes() != target.sizes())
            throw CheckpointError("shape mismatch for '" + prefix + name + "': file " + shape_string(src->sizes()) +
                                  " vs model " + shape_string(target.sizes()));
    }
    torch::NoGradGuard no_grad;
    for (const auto& [name, target] : targets) {
        auto dst = target;
        dst.copy_(archive.find(prefix + name)->to(dst.scalar_type()));
    }
}

} // namespace glyphda
