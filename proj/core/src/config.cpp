#include "glyphda/config.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "glyphda/errors.hpp"

namespace glyphda {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads fields from one JSON object and rejects any key nobody asked for.
class ObjectReader {
public:
    ObjectReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
        if (!object_.is_object())
            throw ConfigError(where() + ": expected an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = object_.find(key);
        if (it == object_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key) + ": wrong value type");
        }
    }

    void read(const char* key, fs::path& out) {
        std::string s = out.string();
        read(key, s);
        out = s;
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = object_.find(key);
        return it == object_.end() ? nullptr : &*it;
    }

    bool has(const char* key) const { return object_.contains(key); }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    void finish() const {
        for (auto it = object_.begin(); it != object_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(field(it.key()) + ": unknown key");
    }

private:
    const json& object_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<TapWeight> read_taps(const json& value, const std::string& path) {
    if (!value.is_array()) throw ConfigError(path + ": expected a list of [tap, weight] pairs");
    std::vector<TapWeight> taps;
    for (const auto& item : value) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_number())
            throw ConfigError(path + ": each entry must be [\"tap\", weight]");
        taps.push_back({item[0].get<std::string>(), item[1].get<double>()});
    }
    return taps;
}

json write_taps(const std::vector<TapWeight>& taps) {
    json out = json::array();
    for (const auto& t : taps) out.push_back(json::array({t.name, t.weight}));
    return out;
}

template <typename Enum>
struct EnumName {
    Enum value;
    const char* name;
};

constexpr EnumName<OptimizerKind> kOptimizerKinds[] = {
    {OptimizerKind::momentum_sgd, "sgd"}, {OptimizerKind::adam, "adam"}};
constexpr EnumName<BackboneKind> kBackbones[] = {
    {BackboneKind::residual18, "residual-18"}, {BackboneKind::small_conv, "small-conv"}};
constexpr EnumName<DatasetKind> kDatasetKinds[] = {
    {DatasetKind::none, "none"}, {DatasetKind::idx, "idx"},
    {DatasetKind::folder, "folder"}, {DatasetKind::synth, "synth"}};
constexpr EnumName<SynthRole> kSynthRoles[] = {
    {SynthRole::clean, "clean"}, {SynthRole::degraded, "degraded"}};

template <typename Enum, std::size_t N>
Enum enum_from(const EnumName<Enum> (&table)[N], const std::string& s, const std::string& field) {
    for (const auto& e : table)
        if (s == e.name) return e.value;
    std::string allowed;
    for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
    throw ConfigError(field + ": unknown value '" + s + "' (allowed: " + allowed + ")");
}

template <typename Enum, std::size_t N>
const char* enum_name(const EnumName<Enum> (&table)[N], Enum v) {
    for (const auto& e : table)
        if (e.value == v) return e.name;
    return "?";
}

template <typename Enum, std::size_t N>
void read_enum(ObjectReader& r, const char* key, const EnumName<Enum> (&table)[N], Enum& out) {
    std::string s = enum_name(table, out);
    r.read(key, s);
    out = enum_from(table, s, r.field(key));
}

void read_range(ObjectReader& r, const char* key, IntRange& out) {
    std::vector<int> v{out.lo, out.hi};
    r.read(key, v);
    if (v.size() != 2) throw ConfigError(r.field(key) + ": expected [lo, hi]");
    out = {v[0], v[1]};
}

void read_range(ObjectReader& r, const char* key, RealRange& out) {
    std::vector<double> v{out.lo, out.hi};
    r.read(key, v);
    if (v.size() != 2) throw ConfigError(r.field(key) + ": expected [lo, hi]");
    out = {v[0], v[1]};
}

DegradationSpec read_degradation(const json& value, const std::string& path) {
    DegradationSpec d;
    ObjectReader r(value, path);
    read_range(r, "occlusion_count", d.occlusion_count);
    read_range(r, "occlusion_size", d.occlusion_size);
    r.read("salt_pepper", d.salt_pepper);
    read_range(r, "morph_radius", d.morph_radius);
    r.read("morph_probability", d.morph_probability);
    read_range(r, "contrast", d.contrast);
    r.read("thickness_jitter", d.thickness_jitter);
    r.read("seed", d.seed);
    r.finish();
    return d;
}

json write_degradation(const DegradationSpec& d) {
    return {
        {"occlusion_count", {d.occlusion_count.lo, d.occlusion_count.hi}},
        {"occlusion_size", {d.occlusion_size.lo, d.occlusion_size.hi}},
        {"salt_pepper", d.salt_pepper},
        {"morph_radius", {d.morph_radius.lo, d.morph_radius.hi}},
        {"morph_probability", d.morph_probability},
        {"contrast", {d.contrast.lo, d.contrast.hi}},
        {"thickness_jitter", d.thickness_jitter},
        {"seed", d.seed},
    };
}

DatasetSpec read_dataset(const json& value, const std::string& path) {
    DatasetSpec d;
    ObjectReader r(value, path);
    read_enum(r, "kind", kDatasetKinds, d.kind);
    r.read("images", d.images);
    r.read("labels", d.labels);
    r.read("root", d.root);
    r.read("classes", d.classes);
    r.read("per_class", d.per_class);
    r.read("seed", d.seed);
    read_enum(r, "role", kSynthRoles, d.role);
    if (const json* deg = r.child("degradation")) d.degradation = read_degradation(*deg, r.field("degradation"));
    r.read("limit", d.limit);
    r.finish();
    return d;
}

json write_dataset(const DatasetSpec& d) {
    json out = {{"kind", enum_name(kDatasetKinds, d.kind)}};
    switch (d.kind) {
    case DatasetKind::none:
        break;
    case DatasetKind::idx:
        out["images"] = d.images.string();
        out["labels"] = d.labels.string();
        break;
    case DatasetKind::folder:
        out["root"] = d.root.string();
        break;
    case DatasetKind::synth:
        out["classes"] = d.classes;
        out["per_class"] = d.per_class;
        out["seed"] = d.seed;
        out["role"] = enum_name(kSynthRoles, d.role);
        out["degradation"] = write_degradation(d.degradation);
        break;
    }
    if (d.limit != 0) out["limit"] = d.limit;
    return out;
}

OptimizerSpec read_optimizer(const json& value, const std::string& path, OptimizerSpec o) {
    ObjectReader r(value, path);
    read_enum(r, "kind", kOptimizerKinds, o.kind);
    r.read("rate", o.rate);
    r.read("momentum", o.momentum);
    r.read("beta2", o.beta2);
    r.read("weight_decay", o.weight_decay);
    r.read("exponent", o.exponent);
    r.finish();
    return o;
}

json write_optimizer(const OptimizerSpec& o) {
    return {{"kind", enum_name(kOptimizerKinds, o.kind)}, {"rate", o.rate},
            {"momentum", o.momentum}, {"beta2", o.beta2},
            {"weight_decay", o.weight_decay}, {"exponent", o.exponent}};
}

AblationFlags read_ablation(const json& value, const std::string& path) {
    ObjectReader r(value, path);
    AblationFlags flags;
    std::string preset;
    r.read("preset", preset);
    if (!preset.empty()) {
        try {
            flags = preset_ablation(preset);
        } catch (const ConfigError& e) {
            throw ConfigError(r.field("preset") + ": " + e.what());
        }
    }
    r.read("use_advF", flags.use_advF);
    r.read("use_advI", flags.use_advI);
    r.read("use_rec", flags.use_rec);
    r.read("use_per", flags.use_per);
    r.read("use_cls_st", flags.use_cls_st);
    r.finish();
    return flags;
}

json write_ablation(const AblationFlags& f) {
    for (const auto& name : ablation_preset_names())
        if (preset_ablation(name) == f) return {{"preset", name}};
    return {{"use_advF", f.use_advF}, {"use_advI", f.use_advI}, {"use_rec", f.use_rec},
            {"use_per", f.use_per}, {"use_cls_st", f.use_cls_st}};
}

ExperimentConfig from_json(const json& root) {
    ExperimentConfig c;
    ObjectReader r(root, "");

    if (const json* v = r.child("loss_weights")) {
        ObjectReader w(*v, "loss_weights");
        w.read("alpha1", c.loss_weights.alpha1);
        w.read("alpha2", c.loss_weights.alpha2);
        w.read("alpha3", c.loss_weights.alpha3);
        w.read("alpha4", c.loss_weights.alpha4);
        w.finish();
    }
    if (const json* v = r.child("perceptual")) {
        ObjectReader p(*v, "perceptual");
        if (const json* t = p.child("texture_taps")) c.perceptual.texture_taps = read_taps(*t, p.field("texture_taps"));
        if (const json* t = p.child("structure_taps")) c.perceptual.structure_taps = read_taps(*t, p.field("structure_taps"));
        if (const json* t = p.child("reconstruction_taps"))
            c.perceptual.reconstruction_taps = read_taps(*t, p.field("reconstruction_taps"));
        p.read("weights_file", c.perceptual.weights_file);
        p.read("width_multiplier", c.perceptual.width_multiplier);
        p.read("seed", c.perceptual.seed);
        p.finish();
    }
    if (const json* v = r.child("model")) {
        ObjectReader m(*v, "model");
        read_enum(m, "backbone", kBackbones, c.model.backbone);
        m.read("image_side", c.model.image_side);
        m.read("num_classes", c.model.num_classes);
        m.read("structure_width", c.model.structure_width);
        m.read("width_multiplier", c.model.width_multiplier);
        m.read("pretrained_backbone", c.model.pretrained_backbone);
        m.finish();
    }
    if (const json* v = r.child("data")) {
        ObjectReader d(*v, "data");
        if (const json* s = d.child("source")) c.data.source = read_dataset(*s, "data.source");
        if (const json* s = d.child("target")) c.data.target = read_dataset(*s, "data.target");
        if (const json* s = d.child("source_test")) c.data.source_test = read_dataset(*s, "data.source_test");
        if (const json* s = d.child("target_test")) c.data.target_test = read_dataset(*s, "data.target_test");
        d.read("batch_size", c.data.batch_size);
        d.read("augment_crop", c.data.augment_crop);
        d.read("crop_padding", c.data.crop_padding);
        if (d.has("augment_flip")) {
            bool flip = false;
            d.read("augment_flip", flip);
            c.data.augment_flip = flip;
        } else {
            d.child("augment_flip");
        }
        d.finish();
    }
    if (const json* v = r.child("trainer")) {
        ObjectReader t(*v, "trainer");
        t.read("t_max", c.trainer.t_max);
        t.read("seed", c.trainer.seed);
        t.read("log_every", c.trainer.log_every);
        t.read("eval_every", c.trainer.eval_every);
        t.read("checkpoint_every", c.trainer.checkpoint_every);
        t.read("grid_rows", c.trainer.grid_rows);
        t.finish();
    }
    if (const json* v = r.child("optimizers")) {
        ObjectReader o(*v, "optimizers");
        if (const json* g = o.child("backbone"))
            c.backbone_optimizer = read_optimizer(*g, "optimizers.backbone", c.backbone_optimizer);
        if (const json* g = o.child("discriminators"))
            c.discriminator_optimizer = read_optimizer(*g, "optimizers.discriminators", c.discriminator_optimizer);
        if (const json* g = o.child("generator"))
            c.generator_optimizer = read_optimizer(*g, "optimizers.generator", c.generator_optimizer);
        o.finish();
    }
    if (const json* v = r.child("ablation")) c.ablation = read_ablation(*v, "ablation");
    r.read("output_dir", c.output_dir);
    r.finish();
    return c;
}

json to_json(const ExperimentConfig& c) {
    json root;
    root["loss_weights"] = {{"alpha1", c.loss_weights.alpha1}, {"alpha2", c.loss_weights.alpha2},
                            {"alpha3", c.loss_weights.alpha3}, {"alpha4", c.loss_weights.alpha4}};
    root["perceptual"] = {{"texture_taps", write_taps(c.perceptual.texture_taps)},
                          {"structure_taps", write_taps(c.perceptual.structure_taps)},
                          {"reconstruction_taps", write_taps(c.perceptual.reconstruction_taps)},
                          {"weights_file", c.perceptual.weights_file},
                          {"width_multiplier", c.perceptual.width_multiplier},
                          {"seed", c.perceptual.seed}};
    root["model"] = {{"backbone", enum_name(kBackbones, c.model.backbone)},
                     {"image_side", c.model.image_side},
                     {"num_classes", c.model.num_classes},
                     {"structure_width", c.model.structure_width},
                     {"width_multiplier", c.model.width_multiplier},
                     {"pretrained_backbone", c.model.pretrained_backbone}};
    json data = {{"source", write_dataset(c.data.source)},
                 {"target", write_dataset(c.data.target)},
                 {"source_test", write_dataset(c.data.source_test)},
                 {"target_test", write_dataset(c.data.target_test)},
                 {"batch_size", c.data.batch_size},
                 {"augment_crop", c.data.augment_crop},
                 {"crop_padding", c.data.crop_padding}};
    if (c.data.augment_flip) data["augment_flip"] = *c.data.augment_flip;
    root["data"] = data;
    root["trainer"] = {{"t_max", c.trainer.t_max},
                       {"seed", c.trainer.seed},
                       {"log_every", c.trainer.log_every},
                       {"eval_every", c.trainer.eval_every},
                       {"checkpoint_every", c.trainer.checkpoint_every},
                       {"grid_rows", c.trainer.grid_rows}};
    root["optimizers"] = {{"backbone", write_optimizer(c.backbone_optimizer)},
                          {"discriminators", write_optimizer(c.discriminator_optimizer)},
                          {"generator", write_optimizer(c.generator_optimizer)}};
    root["ablation"] = write_ablation(c.ablation);
    root["output_dir"] = c.output_dir.string();
    return root;
}

json parse_scalar(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

void apply_override(json& root, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "': expected key=value");
    std::string key = assignment.substr(0, eq);
    json value = parse_scalar(assignment.substr(eq + 1));

    // A preset replaces whatever flags the file spelled out.
    if (key == "ablation.preset") {
        root["ablation"] = json{{"preset", value}};
        return;
    }
    json* node = &root;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError("override '" + key + "': " + parts[i] + " is not an object");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) throw ConfigError("override '" + key + "': parent is not an object");
    (*node)[parts.back()] = value;
}

void require(bool ok, const std::string& field, const std::string& constraint) {
    if (!ok) throw ConfigError(field + ": must satisfy " + constraint);
}

void validate_dataset(const DatasetSpec& d, const std::string& field, bool check_paths) {
    switch (d.kind) {
    case DatasetKind::none:
        return;
    case DatasetKind::idx:
        require(!d.images.empty(), field + ".images", "non-empty path");
        require(!d.labels.empty(), field + ".labels", "non-empty path");
        if (check_paths) {
            require(fs::exists(d.images), field + ".images", "existing file (" + d.images.string() + ")");
            require(fs::exists(d.labels), field + ".labels", "existing file (" + d.labels.string() + ")");
        }
        break;
    case DatasetKind::folder:
        require(!d.root.empty(), field + ".root", "non-empty path");
        if (check_paths) require(fs::is_directory(d.root), field + ".root", "existing directory (" + d.root.string() + ")");
        break;
    case DatasetKind::synth:
        require(d.classes >= 2, field + ".classes", ">= 2");
        require(d.per_class >= 2, field + ".per_class", ">= 2");
        try {
            d.degradation.validate();
        } catch (const ConfigError& e) {
            throw ConfigError(field + ".degradation." + e.what());
        }
        break;
    }
    require(d.limit >= 0, field + ".limit", ">= 0");
}

void validate_taps(const std::vector<TapWeight>& taps, const std::string& field) {
    const auto& known = perceptual_tap_names();
    std::set<std::string> seen;
    for (const auto& t : taps) {
        require(std::find(known.begin(), known.end(), t.name) != known.end(), field,
                "tap names among relu1_1..relu5_1 (got '" + t.name + "')");
        require(seen.insert(t.name).second, field, "unique tap names");
        require(std::isfinite(t.weight) && t.weight > 0, field + "." + t.name, "finite weight > 0");
    }
}

} // namespace

void DegradationSpec::validate() const {
    auto range_ok = [](IntRange r) { return r.lo >= 0 && r.lo <= r.hi; };
    require(range_ok(occlusion_count), "occlusion_count", "0 <= lo <= hi");
    require(range_ok(occlusion_size), "occlusion_size", "0 <= lo <= hi");
    require(occlusion_count.hi == 0 || occlusion_size.lo >= 1, "occlusion_size", "lo >= 1 when occlusion is enabled");
    require(salt_pepper >= 0 && salt_pepper <= 1, "salt_pepper", "probability in [0, 1]");
    require(range_ok(morph_radius), "morph_radius", "0 <= lo <= hi");
    require(morph_probability >= 0 && morph_probability <= 1, "morph_probability", "probability in [0, 1]");
    require(contrast.lo > 0 && contrast.lo <= contrast.hi && contrast.hi <= 1, "contrast", "0 < lo <= hi <= 1");
    require(thickness_jitter >= 0, "thickness_jitter", ">= 0");
}

bool DegradationSpec::is_identity() const {
    return occlusion_count.hi == 0 && salt_pepper == 0 && (morph_probability == 0 || morph_radius.hi == 0) &&
           contrast.lo == 1 && contrast.hi == 1 && thickness_jitter == 0;
}

void LossWeights::validate() const {
    const std::pair<const char*, double> fields[] = {
        {"alpha1", alpha1}, {"alpha2", alpha2}, {"alpha3", alpha3}, {"alpha4", alpha4}};
    for (auto [name, v] : fields)
        require(std::isfinite(v) && v >= 0, std::string("loss_weights.") + name, "finite and >= 0");
}

const std::vector<std::string>& perceptual_tap_names() {
    static const std::vector<std::string> names{"relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu5_1"};
    return names;
}

PerceptualSpec PerceptualSpec::defaults() {
    PerceptualSpec p;
    p.texture_taps = {{"relu1_1", 1.0}, {"relu2_1", 1.0}, {"relu3_1", 1.0}};
    p.structure_taps = {{"relu4_1", 1.0 / 4}, {"relu5_1", 1.0}};
    p.reconstruction_taps = {{"relu1_1", 1.0 / 32}, {"relu2_1", 1.0 / 16}, {"relu3_1", 1.0 / 8},
                             {"relu4_1", 1.0 / 4}, {"relu5_1", 1.0}};
    return p;
}

void PerceptualSpec::validate() const {
    validate_taps(texture_taps, "perceptual.texture_taps");
    validate_taps(structure_taps, "perceptual.structure_taps");
    validate_taps(reconstruction_taps, "perceptual.reconstruction_taps");
    std::set<std::string> rec, uni;
    for (const auto& t : reconstruction_taps) rec.insert(t.name);
    for (const auto& t : texture_taps) uni.insert(t.name);
    for (const auto& t : structure_taps) uni.insert(t.name);
    require(rec == uni, "perceptual.reconstruction_taps", "tap set equal to texture_taps union structure_taps");
    require(std::isfinite(width_multiplier) && width_multiplier > 0, "perceptual.width_multiplier", "> 0");
}

void ScheduleSpec::validate() const {
    require(std::isfinite(base_rate) && base_rate > 0, "schedule.base_rate", "> 0");
    require(total_iterations > 0, "schedule.total_iterations", "> 0");
    require(std::isfinite(exponent) && exponent > 0, "schedule.exponent", "> 0");
}

std::string_view to_string(OptimizerGroup group) {
    switch (group) {
    case OptimizerGroup::backbone: return "backbone";
    case OptimizerGroup::discriminators: return "discriminators";
    case OptimizerGroup::generator: return "generator";
    }
    return "?";
}

std::string_view to_string(OptimizerKind kind) { return enum_name(kOptimizerKinds, kind); }
std::string_view to_string(BackboneKind kind) { return enum_name(kBackbones, kind); }

void OptimizerSpec::validate(std::string_view where) const {
    const std::string w(where);
    require(std::isfinite(rate) && rate > 0, w + ".rate", "> 0");
    require(momentum >= 0 && momentum < 1, w + ".momentum", "in [0, 1)");
    require(beta2 >= 0 && beta2 < 1, w + ".beta2", "in [0, 1)");
    require(std::isfinite(weight_decay) && weight_decay >= 0, w + ".weight_decay", ">= 0");
    require(std::isfinite(exponent) && exponent > 0, w + ".exponent", "> 0");
}

const std::vector<std::string>& ablation_preset_names() {
    static const std::vector<std::string> names{"source-only", "model-A", "model-B", "model-C",
                                                "model-D",     "model-E", "full"};
    return names;
}

AblationFlags preset_ablation(std::string_view name) {
    //                                  advF   advI   rec    per    cls_st
    if (name == "source-only") return {false, false, false, false, false};
    if (name == "model-A") return {false, true, true, true, true};
    if (name == "model-B") return {true, false, false, false, false};
    if (name == "model-C") return {true, true, false, false, false};
    if (name == "model-D") return {true, true, true, false, false};
    if (name == "model-E") return {true, true, true, true, false};
    if (name == "full") return {true, true, true, true, true};
    throw ConfigError("unknown ablation preset '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
    require(image_side >= 8, "model.image_side", ">= 8");
    require(num_classes >= 2, "model.num_classes", ">= 2");
    require(structure_width >= 1, "model.structure_width", ">= 1");
    require(backbone != BackboneKind::residual18 || structure_width == 512, "model.structure_width",
            "== 512 for the residual-18 backbone");
    require(backbone != BackboneKind::small_conv || image_side % 4 == 0, "model.image_side",
            "divisible by 4 for the small-conv backbone");
    require(backbone != BackboneKind::residual18 || image_side % 32 == 0, "model.image_side",
            "divisible by 32 for the residual-18 backbone");
    require(std::isfinite(width_multiplier) && width_multiplier > 0, "model.width_multiplier", "> 0");
}

const OptimizerSpec& ExperimentConfig::optimizer(OptimizerGroup group) const {
    switch (group) {
    case OptimizerGroup::backbone: return backbone_optimizer;
    case OptimizerGroup::discriminators: return discriminator_optimizer;
    case OptimizerGroup::generator: return generator_optimizer;
    }
    return backbone_optimizer;
}

ScheduleSpec ExperimentConfig::schedule(OptimizerGroup group) const {
    const auto& o = optimizer(group);
    return {o.rate, trainer.t_max, o.exponent};
}

std::map<OptimizerGroup, ScheduleSpec> ExperimentConfig::schedules() const {
    return {{OptimizerGroup::backbone, schedule(OptimizerGroup::backbone)},
            {OptimizerGroup::discriminators, schedule(OptimizerGroup::discriminators)},
            {OptimizerGroup::generator, schedule(OptimizerGroup::generator)}};
}

void ExperimentConfig::validate(bool check_paths) const {
    loss_weights.validate();
    perceptual.validate();
    model.validate();
    backbone_optimizer.validate("optimizers.backbone");
    discriminator_optimizer.validate("optimizers.discriminators");
    generator_optimizer.validate("optimizers.generator");
    require(data.batch_size >= 2, "data.batch_size", ">= 2");
    require(data.crop_padding >= 0, "data.crop_padding", ">= 0");
    require(trainer.t_max >= 1, "trainer.t_max", ">= 1");
    require(trainer.log_every >= 1, "trainer.log_every", ">= 1");
    require(trainer.eval_every >= 1, "trainer.eval_every", ">= 1");
    require(trainer.checkpoint_every >= 1, "trainer.checkpoint_every", ">= 1");
    require(trainer.grid_rows >= 1, "trainer.grid_rows", ">= 1");
    validate_dataset(data.source, "data.source", check_paths);
    validate_dataset(data.target, "data.target", check_paths);
    validate_dataset(data.source_test, "data.source_test", check_paths);
    validate_dataset(data.target_test, "data.target_test", check_paths);
    if (check_paths && !perceptual.weights_file.empty())
        require(fs::exists(perceptual.weights_file), "perceptual.weights_file", "existing file");
    if (check_paths && !model.pretrained_backbone.empty())
        require(fs::exists(model.pretrained_backbone), "model.pretrained_backbone", "existing file");
    require(!output_dir.empty(), "output_dir", "non-empty path");
}

ExperimentConfig parse_config(std::string_view json_text, const LoadOptions& options) {
    json root;
    const bool blank = json_text.find_first_not_of(" \t\r\n") == std::string_view::npos;
    try {
        if (!blank) root = json::parse(json_text.begin(), json_text.end(), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("parse error: ") + e.what());
    }
    if (root.is_null()) root = json::object();
    for (const auto& o : options.overrides) apply_override(root, o);
    ExperimentConfig config = from_json(root);
    config.validate(options.check_paths);
    return config;
}

ExperimentConfig load_config(const fs::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), options);
}

std::string serialize_config(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_digest(const ExperimentConfig& config) {
    const std::string text = to_json(config).dump();
    unsigned char hash[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), hash);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned char b : hash) {
        out += hex[b >> 4];
        out += hex[b & 15];
    }
    return out;
}

fs::path resolve_output_dir(const ExperimentConfig& config) {
    if (config.output_dir.is_absolute()) return config.output_dir;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / config.output_dir;
    return config.output_dir;
}

DegradationSpec parse_degradation(std::string_view json_text) {
    json root;
    try {
        root = json::parse(json_text.begin(), json_text.end(), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("degradation parse error: ") + e.what());
    }
    auto spec = read_degradation(root, "degradation");
    try {
        spec.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("degradation.") + e.what());
    }
    return spec;
}

std::string serialize_degradation(const DegradationSpec& spec) { return write_degradation(spec).dump(2); }

} // namespace glyphda
