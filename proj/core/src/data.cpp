#include "glyphda/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <sstream>

#include "glyphda/errors.hpp"
#include "glyphda/image_io.hpp"

namespace glyphda {

namespace fs = std::filesystem;

std::string_view to_string(DomainTag domain) { return domain == DomainTag::source ? "source" : "target"; }

torch::Tensor domain_one_hot(DomainTag domain, torch::TensorOptions options) {
    auto out = torch::zeros({2}, options.has_dtype() ? options : options.dtype(torch::kFloat));
    out[domain == DomainTag::source ? 0 : 1] = 1;
    return out;
}

// ---------------------------------------------------------------- ImageSet

ImageSet::ImageSet(torch::Tensor bytes) : bytes_(std::move(bytes)) {
    if (bytes_.dim() != 4 || bytes_.scalar_type() != torch::kUInt8)
        throw ShapeError("ImageSet expects uint8 [N, H, W, C]");
    if (bytes_.size(1) != bytes_.size(2)) throw ShapeError("ImageSet expects square images");
    if (bytes_.size(3) != 1 && bytes_.size(3) != 3) throw ShapeError("ImageSet expects 1 or 3 channels");
    bytes_ = bytes_.contiguous();
}

torch::Tensor bytes_to_pixels(const torch::Tensor& bytes) {
    // [..., H, W, C] uint8 -> [..., 3, H, W] float
    auto x = bytes.to(torch::kFloat).div(127.5).sub(1.0).movedim(-1, -3);
    if (x.size(-3) == 1) {
        std::vector<std::int64_t> shape(x.sizes().begin(), x.sizes().end());
        shape[shape.size() - 3] = 3;
        x = x.expand(shape);
    }
    return x.contiguous();
}

torch::Tensor pixels_to_bytes(const torch::Tensor& pixels) {
    auto x = pixels.detach().to(torch::kFloat).clamp(-1.0, 1.0).add(1.0).mul(127.5).round();
    return x.movedim(-3, -1).to(torch::kUInt8).contiguous();
}

torch::Tensor ImageSet::pixels(const std::vector<std::int64_t>& indices) const {
    auto idx = torch::tensor(indices, torch::kLong);
    return bytes_to_pixels(bytes_.index_select(0, idx));
}

torch::Tensor ImageSet::pixels(std::int64_t begin, std::int64_t end) const {
    return bytes_to_pixels(bytes_.slice(0, begin, end));
}

ImageSet ImageSet::resized(int side) const {
    if (!bytes_.defined() || this->side() == side) return *this;
    auto x = bytes_.to(torch::kFloat).permute({0, 3, 1, 2});
    namespace F = torch::nn::functional;
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .size(std::vector<std::int64_t>{side, side})
                              .mode(torch::kBilinear)
                              .align_corners(false));
    return ImageSet(x.round().clamp(0, 255).to(torch::kUInt8).permute({0, 2, 3, 1}).contiguous());
}

ImageSet ImageSet::head(std::int64_t n) const {
    if (n <= 0 || n >= size()) return *this;
    return ImageSet(bytes_.slice(0, 0, n).clone());
}

LabeledSet LabeledSet::head(std::int64_t n) const {
    if (n <= 0 || n >= size()) return *this;
    return {images.head(n), std::vector<std::int64_t>(labels.begin(), labels.begin() + n), num_classes,
            class_names};
}

LabeledSet LabeledSet::resized(int side) const { return {images.resized(side), labels, num_classes, class_names}; }

LabeledSet FolderCorpus::as_labeled() const {
    if (!labels) throw DataError("corpus has no class subdirectories; it can only be used unlabeled");
    return {images, *labels, static_cast<int>(class_names.size()), class_names};
}

// ---------------------------------------------------------------- IDX

namespace {

class GzFile {
public:
    explicit GzFile(const fs::path& path) : file_(gzopen(path.c_str(), "rb")) {
        if (!file_) throw DataError("cannot open " + path.string());
    }
    ~GzFile() {
        if (file_) gzclose(file_);
    }
    GzFile(const GzFile&) = delete;
    GzFile& operator=(const GzFile&) = delete;

    // Reads up to n bytes; returns the number read.
    std::size_t read(void* dst, std::size_t n) {
        std::size_t total = 0;
        auto* out = static_cast<char*>(dst);
        while (total < n) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n - total, 1u << 30));
            int got = gzread(file_, out + total, chunk);
            if (got <= 0) break;
            total += static_cast<std::size_t>(got);
        }
        return total;
    }

private:
    gzFile file_;
};

std::uint32_t big_endian(const std::array<unsigned char, 4>& b) {
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

struct IdxPayload {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> bytes;
};

IdxPayload read_idx(const fs::path& path, std::uint32_t expected_rank) {
    GzFile file(path);
    std::array<unsigned char, 4> header{};
    if (file.read(header.data(), 4) != 4 || header[0] != 0 || header[1] != 0 || header[2] != 0x08 ||
        header[3] != expected_rank)
        throw DataError("bad magic number in " + path.string());
    IdxPayload out;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < expected_rank; ++i) {
        std::array<unsigned char, 4> dim{};
        if (file.read(dim.data(), 4) != 4) throw DataError("truncated header in " + path.string());
        out.dims.push_back(big_endian(dim));
        count *= out.dims.back();
    }
    out.bytes.resize(count);
    if (file.read(out.bytes.data(), count) != count) throw DataError("truncated payload in " + path.string());
    return out;
}

std::vector<std::int64_t> sorted_class_labels(const std::vector<std::uint8_t>& raw, int& num_classes) {
    std::vector<std::int64_t> labels(raw.begin(), raw.end());
    const auto max = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    num_classes = static_cast<int>(std::max<std::int64_t>(max + 1, 2));
    return labels;
}

} // namespace

LabeledSet load_idx_corpus(const fs::path& images_path, const fs::path& labels_path) {
    auto images = read_idx(images_path, 3);
    auto labels = read_idx(labels_path, 1);
    if (images.dims[0] != labels.dims[0])
        throw DataError("image/label count mismatch: " + std::to_string(images.dims[0]) + " images vs " +
                        std::to_string(labels.dims[0]) + " labels");
    const auto n = static_cast<std::int64_t>(images.dims[0]);
    const auto h = static_cast<std::int64_t>(images.dims[1]);
    const auto w = static_cast<std::int64_t>(images.dims[2]);
    if (h != w) throw DataError("IDX images must be square in " + images_path.string());
    auto bytes = torch::from_blob(images.bytes.data(), {n, h, w, 1}, torch::kUInt8).clone();
    LabeledSet set;
    set.images = ImageSet(bytes);
    set.labels = sorted_class_labels(labels.bytes, set.num_classes);
    for (int k = 0; k < set.num_classes; ++k) set.class_names.push_back(std::to_string(k));
    return set;
}

// ---------------------------------------------------------------- folders

namespace {

std::vector<fs::path> sorted_images(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && is_supported_image(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

torch::Tensor stack_rasters(const std::vector<RasterImage>& rasters) {
    const int side = rasters.front().width;
    bool any_color = false;
    bool uniform = true;
    for (const auto& r : rasters) {
        any_color |= r.channels == 3;
        uniform &= r.width == side && r.height == side;
    }
    const int channels = any_color ? 3 : 1;
    std::vector<torch::Tensor> items;
    items.reserve(rasters.size());
    for (std::size_t i = 0; i < rasters.size(); ++i) {
        const auto& r = rasters[i];
        auto t = torch::from_blob(const_cast<std::uint8_t*>(r.bytes.data()), {r.height, r.width, r.channels},
                                  torch::kUInt8)
                     .clone();
        if (channels == 3 && r.channels == 1) t = t.expand({r.height, r.width, 3}).contiguous();
        if (!uniform && (r.width != side || r.height != side)) {
            namespace F = torch::nn::functional;
            auto f = t.permute({2, 0, 1}).unsqueeze(0).to(torch::kFloat);
            f = F::interpolate(f, F::InterpolateFuncOptions()
                                      .size(std::vector<std::int64_t>{side, side})
                                      .mode(torch::kBilinear)
                                      .align_corners(false));
            t = f.squeeze(0).permute({1, 2, 0}).round().clamp(0, 255).to(torch::kUInt8).contiguous();
        }
        items.push_back(t);
    }
    return torch::stack(items);
}

} // namespace

FolderCorpus load_folder_corpus(const fs::path& root) {
    if (!fs::is_directory(root)) throw DataError("corpus root is not a directory: " + root.string());
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    std::sort(class_dirs.begin(), class_dirs.end());

    FolderCorpus corpus;
    std::vector<fs::path> files;
    std::vector<std::int64_t> labels;
    if (class_dirs.empty()) {
        files = sorted_images(root);
    } else {
        for (std::size_t k = 0; k < class_dirs.size(); ++k) {
            corpus.class_names.push_back(class_dirs[k].filename().string());
            for (auto& f : sorted_images(class_dirs[k])) {
                files.push_back(std::move(f));
                labels.push_back(static_cast<std::int64_t>(k));
            }
        }
    }
    if (files.empty()) throw DataError("empty corpus root: " + root.string());

    std::vector<RasterImage> rasters;
    rasters.reserve(files.size());
    for (const auto& f : files) rasters.push_back(read_png(f));
    corpus.images = ImageSet(stack_rasters(rasters));
    if (!class_dirs.empty()) corpus.labels = std::move(labels);
    return corpus;
}

void write_folder_corpus(const fs::path& root, const LabeledSet& set) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
    const auto& bytes = set.images.bytes();
    const int side = set.images.side();
    const int channels = static_cast<int>(bytes.size(3));
    std::vector<std::int64_t> counter(set.num_classes, 0);
    for (std::int64_t i = 0; i < set.size(); ++i) {
        const auto label = set.labels[i];
        const std::string name = label < static_cast<std::int64_t>(set.class_names.size())
                                     ? set.class_names[label]
                                     : std::to_string(label);
        const fs::path dir = root / name;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        char file[32];
        std::snprintf(file, sizeof file, "%06lld.png", static_cast<long long>(counter[label]++));
        RasterImage raster{side, side, channels, {}};
        auto item = bytes[i].contiguous();
        raster.bytes.assign(item.data_ptr<std::uint8_t>(), item.data_ptr<std::uint8_t>() + item.numel());
        write_png(dir / file, raster);
    }
}

LabeledSet load_labeled(const DatasetSpec& spec, int side) {
    LabeledSet set;
    switch (spec.kind) {
    case DatasetKind::none:
        throw DataError("dataset not configured");
    case DatasetKind::idx:
        set = load_idx_corpus(spec.images, spec.labels);
        break;
    case DatasetKind::folder:
        set = load_folder_corpus(spec.root).as_labeled();
        break;
    case DatasetKind::synth: {
        auto corpus = synth_glyph_corpus(spec.classes, spec.per_class, spec.seed, spec.degradation, side);
        set = spec.role == SynthRole::clean ? corpus.clean : corpus.degraded;
        break;
    }
    }
    return set.head(spec.limit).resized(side);
}

ImageSet load_unlabeled(const DatasetSpec& spec, int side) {
    if (spec.kind == DatasetKind::folder) {
        auto corpus = load_folder_corpus(spec.root);
        return corpus.images.head(spec.limit).resized(side);
    }
    return load_labeled(spec, side).images;
}

// ---------------------------------------------------------------- stream

BatchStream::BatchStream(LabeledSet source, ImageSet target, int batch_size, std::uint64_t seed,
                         AugmentOptions augment)
    : source_(std::move(source)), target_(std::move(target)), batch_size_(batch_size), augment_(augment) {
    if (source_.size() == 0 || target_.size() == 0) throw DataError("batch stream needs non-empty source and target");
    if (batch_size_ < 1) throw DataError("batch size must be positive");
    if (batch_size_ > source_.size() || batch_size_ > target_.size())
        throw DataError("batch size " + std::to_string(batch_size_) + " exceeds set size (source " +
                        std::to_string(source_.size()) + ", target " + std::to_string(target_.size()) + ")");
    std::seed_seq seq{seed, std::uint64_t{0x5eed}};
    std::array<std::uint64_t, 3> seeds{};
    seq.generate(seeds.begin(), seeds.end());
    source_cursor_.rng.seed(seeds[0]);
    target_cursor_.rng.seed(seeds[1]);
    augment_rng_.seed(seeds[2]);
}

std::vector<std::int64_t> BatchStream::take(Cursor& cursor, std::int64_t set_size) {
    if (cursor.order.empty() || cursor.position + batch_size_ > cursor.order.size()) {
        cursor.order.resize(static_cast<std::size_t>(set_size));
        for (std::int64_t i = 0; i < set_size; ++i) cursor.order[i] = i;
        std::shuffle(cursor.order.begin(), cursor.order.end(), cursor.rng);
        cursor.position = 0;
    }
    std::vector<std::int64_t> out(cursor.order.begin() + cursor.position,
                                  cursor.order.begin() + cursor.position + batch_size_);
    cursor.position += batch_size_;
    return out;
}

torch::Tensor BatchStream::augment(torch::Tensor pixels) {
    if (!augment_.crop && !augment_.flip) return pixels;
    const auto side = pixels.size(-1);
    const int pad = augment_.crop ? augment_.padding : 0;
    auto padded = pad > 0 ? torch::constant_pad_nd(pixels, {pad, pad, pad, pad}, kBackground) : pixels;
    std::vector<torch::Tensor> out;
    out.reserve(pixels.size(0));
    std::uniform_int_distribution<int> offset(0, 2 * pad);
    std::bernoulli_distribution coin(0.5);
    for (std::int64_t i = 0; i < pixels.size(0); ++i) {
        auto item = padded[i];
        if (pad > 0) {
            const int dy = offset(augment_rng_);
            const int dx = offset(augment_rng_);
            item = item.slice(1, dy, dy + side).slice(2, dx, dx + side);
        }
        if (augment_.flip && coin(augment_rng_)) item = item.flip({2});
        out.push_back(item);
    }
    return torch::stack(out).contiguous();
}

std::pair<ImageBatch, ImageBatch> BatchStream::next() {
    last_source_ = take(source_cursor_, source_.size());
    last_target_ = take(target_cursor_, target_.size());

    std::vector<std::int64_t> labels;
    labels.reserve(last_source_.size());
    for (auto i : last_source_) labels.push_back(source_.labels[i]);

    ImageBatch source{augment(source_.images.pixels(last_source_)), DomainTag::source,
                      torch::tensor(labels, torch::kLong)};
    ImageBatch target{augment(target_.pixels(last_target_)), DomainTag::target, std::nullopt};
    return {std::move(source), std::move(target)};
}

std::string BatchStream::save_state() const {
    std::ostringstream out;
    auto write_cursor = [&out](const Cursor& c) {
        out << c.rng << '\n' << c.position << ' ' << c.order.size();
        for (auto v : c.order) out << ' ' << v;
        out << '\n';
    };
    write_cursor(source_cursor_);
    write_cursor(target_cursor_);
    out << augment_rng_ << '\n';
    return out.str();
}

void BatchStream::load_state(const std::string& state) {
    std::istringstream in(state);
    auto read_cursor = [&in](Cursor& c) {
        std::size_t n = 0;
        in >> c.rng >> c.position >> n;
        c.order.resize(n);
        for (auto& v : c.order) in >> v;
    };
    Cursor source = source_cursor_, target = target_cursor_;
    std::mt19937_64 aug;
    read_cursor(source);
    read_cursor(target);
    in >> aug;
    if (!in) throw DataError("malformed batch stream state");
    for (auto v : source.order)
        if (v < 0 || v >= source_.size()) throw DataError("batch stream state does not match the source set");
    for (auto v : target.order)
        if (v < 0 || v >= target_.size()) throw DataError("batch stream state does not match the target set");
    source_cursor_ = std::move(source);
    target_cursor_ = std::move(target);
    augment_rng_ = aug;
}

} // namespace glyphda
