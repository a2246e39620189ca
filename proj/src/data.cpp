#include "camkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "camkit/io_png.hpp"

namespace camkit {

namespace fs = std::filesystem;

std::string to_string(AnnotationType t) {
    switch (t) {
        case AnnotationType::accurate: return "accurate";
        case AnnotationType::bbox: return "bbox";
        case AnnotationType::random_patch: return "random_patch";
        case AnnotationType::whole_image: return "whole_image";
        case AnnotationType::none: return "none";
    }
    return "none";
}

AnnotationType annotation_type_from_string(const std::string& s) {
    if (s == "accurate") return AnnotationType::accurate;
    if (s == "bbox") return AnnotationType::bbox;
    if (s == "random_patch" || s == "random") return AnnotationType::random_patch;
    if (s == "whole_image" || s == "whole") return AnnotationType::whole_image;
    if (s == "none") return AnnotationType::none;
    throw std::invalid_argument("unknown annotation type: " + s);
}

void AnnotatedSample::validate() const {
    if (label != 0 && label != 1)
        throw std::invalid_argument("sample " + sample_id + ": label must be 0 or 1");
    if (mask.has_value() != (annotation_type != AnnotationType::none))
        throw std::invalid_argument("sample " + sample_id +
                                    ": annotation_type none iff mask absent");
    if (mask) {
        if (mask->h != image.h || mask->w != image.w)
            throw std::invalid_argument("sample " + sample_id + ": mask shape differs from image");
        if (label == 0 && mask_area(*mask) != 0)
            throw std::invalid_argument("sample " + sample_id + ": normal sample with nonempty mask");
    }
}

// ---------------------------------------------------------------------------
// preprocessing

Image preprocess_crop_layers(const Image& image, double threshold_fraction, int target_size) {
    if (threshold_fraction <= 0.0 || threshold_fraction >= 1.0)
        throw std::invalid_argument("preprocess_crop_layers: threshold_fraction must be in (0,1)");
    if (image.h == 0 || image.w == 0)
        throw std::invalid_argument("preprocess_crop_layers: empty image");

    std::vector<double> row_sums(image.h, 0.0);
    double max_sum = 0.0;
    for (int y = 0; y < image.h; ++y) {
        double s = 0.0;
        for (int x = 0; x < image.w; ++x) s += image.at(y, x);
        row_sums[y] = s;
        max_sum = std::max(max_sum, s);
    }
    if (max_sum <= 0.0) throw std::runtime_error("empty image");

    const double threshold = threshold_fraction * max_sum;
    int top = -1, bottom = -1;
    for (int y = 0; y < image.h; ++y) {
        if (row_sums[y] > threshold) {
            if (top < 0) top = y;
            bottom = y;
        }
    }
    if (top < 0) throw std::runtime_error("no layer band found");

    Image band(bottom - top + 1, image.w);
    for (int y = top; y <= bottom; ++y)
        for (int x = 0; x < image.w; ++x) band.at(y - top, x) = image.at(y, x);
    if (target_size > 0) return resize_bilinear(band, target_size, target_size);
    return band;
}

AnnotatedSample preprocess_crop_layers(const AnnotatedSample& s, double threshold_fraction,
                                       int target_size) {
    // Recompute the band bounds once so image and mask are cropped identically.
    if (threshold_fraction <= 0.0 || threshold_fraction >= 1.0)
        throw std::invalid_argument("preprocess_crop_layers: threshold_fraction must be in (0,1)");
    std::vector<double> row_sums(s.image.h, 0.0);
    double max_sum = 0.0;
    for (int y = 0; y < s.image.h; ++y) {
        double acc = 0.0;
        for (int x = 0; x < s.image.w; ++x) acc += s.image.at(y, x);
        row_sums[y] = acc;
        max_sum = std::max(max_sum, acc);
    }
    if (max_sum <= 0.0) throw std::runtime_error("empty image");
    const double threshold = threshold_fraction * max_sum;
    int top = -1, bottom = -1;
    for (int y = 0; y < s.image.h; ++y) {
        if (row_sums[y] > threshold) {
            if (top < 0) top = y;
            bottom = y;
        }
    }
    if (top < 0) throw std::runtime_error("no layer band found");

    AnnotatedSample out = s;
    Image band(bottom - top + 1, s.image.w);
    for (int y = top; y <= bottom; ++y)
        for (int x = 0; x < s.image.w; ++x) band.at(y - top, x) = s.image.at(y, x);
    out.image = target_size > 0 ? resize_bilinear(band, target_size, target_size) : band;
    if (s.mask) {
        Mask mband(bottom - top + 1, s.mask->w);
        for (int y = top; y <= bottom; ++y)
            for (int x = 0; x < s.mask->w; ++x) mband.at(y - top, x) = s.mask->at(y, x);
        out.mask = target_size > 0 ? resize_nearest(mband, target_size, target_size) : mband;
    }
    return out;
}

// ---------------------------------------------------------------------------
// annotation mixing

MixedAnnotationDataset make_mixed_annotation(const std::vector<AnnotatedSample>& train, int R,
                                             std::uint64_t seed) {
    if (train.empty()) throw std::invalid_argument("make_mixed_annotation: empty train list");
    if (R < 1) throw std::invalid_argument("make_mixed_annotation: R must be >= 1");
    for (const auto& s : train)
        if (!s.mask)
            throw std::invalid_argument("make_mixed_annotation: sample " + s.sample_id +
                                        " has no mask to drop");

    MixedAnnotationDataset out;
    out.samples = train;
    out.P = static_cast<long long>(train.size());
    out.R = R;
    out.seed = seed;
    out.Q = std::llround(static_cast<double>(out.P) / R);

    // Stratified by class: per-class quota proportional to class size,
    // remainder to the larger fractional part.
    std::vector<size_t> diseased, normal;
    for (size_t i = 0; i < train.size(); ++i)
        (train[i].label ? diseased : normal).push_back(i);
    const double exact_d =
        out.P ? static_cast<double>(out.Q) * diseased.size() / out.P : 0.0;
    long long q_d = std::llround(exact_d);
    q_d = std::clamp<long long>(q_d, std::max<long long>(0, out.Q - static_cast<long long>(normal.size())),
                                std::min<long long>(out.Q, static_cast<long long>(diseased.size())));
    const long long q_n = out.Q - q_d;

    Rng rng = Rng::derive(seed, 0x6d69784dULL); // "mixM"
    rng.shuffle(diseased);
    rng.shuffle(normal);

    std::vector<bool> keep(train.size(), false);
    for (long long i = 0; i < q_d; ++i) keep[diseased[i]] = true;
    for (long long i = 0; i < q_n; ++i) keep[normal[i]] = true;

    for (size_t i = 0; i < out.samples.size(); ++i) {
        if (!keep[i]) {
            out.samples[i].mask.reset();
            out.samples[i].annotation_type = AnnotationType::none;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// annotation degradation

namespace {

Mask degrade_bbox(const Mask& mask) {
    Mask out(mask.h, mask.w, 0);
    const auto comps = connected_components(mask);
    for (const auto& b : comps.boxes)
        for (int y = b.y0; y <= b.y1; ++y)
            for (int x = b.x0; x <= b.x1; ++x) out.at(y, x) = 1;
    return out;
}

// Rectangle (height, width) within the grid whose area is nearest to target;
// ties prefer the aspect ratio closest to `aspect` (height over width).
std::pair<int, int> nearest_area_rect(long long target, double aspect, int max_h, int max_w) {
    target = std::clamp<long long>(target, 1, static_cast<long long>(max_h) * max_w);
    long long best_err = std::numeric_limits<long long>::max();
    double best_aspect_err = std::numeric_limits<double>::infinity();
    int best_h = 1, best_w = 1;
    for (int rh = 1; rh <= max_h; ++rh) {
        const long long rw =
            std::clamp<long long>(std::llround(static_cast<double>(target) / rh), 1, max_w);
        const long long err = std::llabs(static_cast<long long>(rh) * rw - target);
        const double aspect_err =
            std::abs(std::log((static_cast<double>(rh) / rw) / aspect));
        if (err < best_err || (err == best_err && aspect_err < best_aspect_err)) {
            best_err = err;
            best_aspect_err = aspect_err;
            best_h = rh;
            best_w = static_cast<int>(rw);
        }
    }
    return {best_h, best_w};
}

Mask degrade_random_patch(const Mask& mask, std::uint64_t seed) {
    const auto comps = connected_components(mask);
    Mask out(mask.h, mask.w, 0);
    if (comps.boxes.empty()) return out;
    Rng rng = Rng::derive(seed, 0x70617463ULL); // "patc"

    // One rectangle per component. Rectangle areas are chosen so the running
    // total tracks the true total, and placement retries a few times to stay
    // clear of earlier rectangles so the component count is preserved.
    std::vector<Box> placed;
    long long placed_area = 0, true_area = 0;
    for (size_t i = 0; i < comps.boxes.size(); ++i) {
        true_area += comps.areas[i];
        const auto& b = comps.boxes[i];
        const double aspect = static_cast<double>(b.height()) / b.width();
        const auto [rh, rw] = nearest_area_rect(true_area - placed_area, aspect, mask.h, mask.w);
        Box r{};
        for (int attempt = 0; attempt < 64; ++attempt) {
            r.y0 = static_cast<int>(rng.uniform_int(0, mask.h - rh));
            r.x0 = static_cast<int>(rng.uniform_int(0, mask.w - rw));
            r.y1 = r.y0 + rh - 1;
            r.x1 = r.x0 + rw - 1;
            bool clear = true;
            for (const auto& p : placed) {
                if (r.y0 <= p.y1 + 1 && p.y0 <= r.y1 + 1 && r.x0 <= p.x1 + 1 &&
                    p.x0 <= r.x1 + 1) {
                    clear = false;
                    break;
                }
            }
            if (clear) break;
        }
        placed.push_back(r);
        placed_area += static_cast<long long>(rh) * rw;
        for (int y = r.y0; y <= r.y1; ++y)
            for (int x = r.x0; x <= r.x1; ++x) out.at(y, x) = 1;
    }
    return out;
}

} // namespace

Mask degrade_annotation(const Mask& mask, AnnotationType mode, std::uint64_t seed) {
    for (auto p : mask.v)
        if (p > 1) throw std::invalid_argument("degrade_annotation: mask must be binary");
    switch (mode) {
        case AnnotationType::accurate: return mask;
        case AnnotationType::bbox: return degrade_bbox(mask);
        case AnnotationType::random_patch: return degrade_random_patch(mask, seed);
        case AnnotationType::whole_image: return Mask(mask.h, mask.w, 1);
        case AnnotationType::none: break;
    }
    throw std::invalid_argument("degrade_annotation: invalid mode");
}

// ---------------------------------------------------------------------------
// phantom generator

void PhantomConfig::validate() const {
    if (image_size < 8) throw std::invalid_argument("phantom: image_size too small");
    if (n_layers < 1) throw std::invalid_argument("phantom: n_layers must be positive");
    if (blob_count_min < 1 || blob_count_max < blob_count_min)
        throw std::invalid_argument("phantom: bad blob count range");
    if (blob_axis_min <= 0 || blob_axis_max < blob_axis_min)
        throw std::invalid_argument("phantom: bad blob axis range");
    if (speckle_sigma < 0) throw std::invalid_argument("phantom: speckle_sigma must be >= 0");
    if (class_balance <= 0.0 || class_balance >= 1.0)
        throw std::invalid_argument("phantom: class_balance must be in (0,1)");
    // band occupies just over half the image; blobs must fit inside it
    const int band_h = static_cast<int>(std::lround(image_size * 0.55));
    if (2.0 * blob_axis_max + 2.0 > band_h)
        throw std::invalid_argument("phantom: blob axes do not fit inside the layer band");
}

PhantomSample render_phantom(const PhantomConfig& cfg, int label, Rng& rng) {
    const int n = cfg.image_size;
    PhantomSample s;
    s.image = Image(n, n, 0.0f);
    s.mask = Mask(n, n, 0);

    // band placement with vertical jitter
    const int band_h = static_cast<int>(std::lround(n * 0.55));
    const int jitter = static_cast<int>(std::lround(n * 0.08));
    const int top = (n - band_h) / 2 + static_cast<int>(rng.uniform_int(-jitter, jitter));
    s.band_top = std::clamp(top, 0, n - band_h);
    s.band_bottom = s.band_top + band_h - 1;

    // background: dark with a faint vertical ramp
    const double bg = rng.uniform(0.03, 0.08);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            s.image.at(y, x) = static_cast<float>(bg + 0.02 * y / n);

    // layered bands: per-layer brightness plus a low-frequency horizontal
    // modulation and a small wobble of the internal boundaries
    std::vector<double> layer_level(cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) layer_level[l] = rng.uniform(0.45, 0.9);
    std::vector<double> wobble_phase(cfg.n_layers), wobble_freq(cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) {
        wobble_phase[l] = rng.uniform(0.0, 6.283185307179586);
        wobble_freq[l] = rng.uniform(1.0, 2.5);
    }
    const double mod_phase = rng.uniform(0.0, 6.283185307179586);
    const double mod_freq = rng.uniform(0.5, 1.5);

    const double layer_h = static_cast<double>(band_h) / cfg.n_layers;
    for (int x = 0; x < n; ++x) {
        const double mod = 1.0 + 0.08 * std::sin(mod_freq * 6.283185307179586 * x / n + mod_phase);
        for (int y = s.band_top; y <= s.band_bottom; ++y) {
            const double rel = (y - s.band_top) / layer_h;
            int l = std::min(cfg.n_layers - 1, static_cast<int>(rel));
            // wobble internal boundaries by up to 2 px
            if (l > 0) {
                const double boundary = l * layer_h +
                    2.0 * std::sin(wobble_freq[l] * 6.283185307179586 * x / n + wobble_phase[l]);
                if (y - s.band_top < boundary) l -= 1;
            }
            s.image.at(y, x) = static_cast<float>(std::clamp(layer_level[l] * mod, 0.0, 1.0));
        }
    }

    // dark elliptical blobs inside the band for diseased samples
    if (label == 1) {
        const int count = static_cast<int>(rng.uniform_int(cfg.blob_count_min, cfg.blob_count_max));
        for (int b = 0; b < count; ++b) {
            PhantomEllipse e;
            e.ry = rng.uniform(cfg.blob_axis_min, cfg.blob_axis_max);
            e.rx = rng.uniform(cfg.blob_axis_min, cfg.blob_axis_max);
            const double max_r = std::max(e.ry, e.rx);
            e.cy = rng.uniform(s.band_top + max_r + 1.0, s.band_bottom - max_r - 1.0);
            e.cx = rng.uniform(max_r + 1.0, n - max_r - 2.0);
            e.angle = rng.uniform(0.0, 3.141592653589793);
            const double dip = rng.uniform(0.18, 0.3); // blob brightness relative to layer
            const double ca = std::cos(e.angle), sa = std::sin(e.angle);
            const int y0 = std::max(0, static_cast<int>(e.cy - max_r - 2));
            const int y1 = std::min(n - 1, static_cast<int>(e.cy + max_r + 2));
            const int x0 = std::max(0, static_cast<int>(e.cx - max_r - 2));
            const int x1 = std::min(n - 1, static_cast<int>(e.cx + max_r + 2));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double dy = y - e.cy, dx = x - e.cx;
                    const double u = (dx * ca + dy * sa) / e.rx;
                    const double v = (-dx * sa + dy * ca) / e.ry;
                    const double d = std::sqrt(u * u + v * v);
                    if (d <= 1.0) {
                        s.mask.at(y, x) = 1;
                        // feathered edge over the outer 15% of the radius
                        const double edge = std::clamp((1.0 - d) / 0.15, 0.0, 1.0);
                        const double mult = 1.0 - (1.0 - dip) * edge;
                        s.image.at(y, x) = static_cast<float>(s.image.at(y, x) * mult);
                    }
                }
            }
            s.blobs.push_back(e);
        }
    }

    // multiplicative speckle
    if (cfg.speckle_sigma > 0) {
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const double g = 1.0 + cfg.speckle_sigma * rng.normal();
                s.image.at(y, x) = static_cast<float>(
                    std::clamp(s.image.at(y, x) * std::max(0.0, g), 0.0, 1.0));
            }
    }
    return s;
}

namespace {

AnnotatedSample phantom_to_sample(PhantomSample&& p, int label, const std::string& id) {
    AnnotatedSample s;
    s.image = std::move(p.image);
    s.label = label;
    s.mask = std::move(p.mask);
    s.annotation_type = AnnotationType::accurate;
    s.sample_id = id;
    return s;
}

// Deterministic label sequence: diseased exactly when the integer part of
// the running balance advances. Keeps proportions within rounding for every
// prefix, so any prefix of a split is itself balanced.
int phantom_label(int index, double balance) {
    const auto cum = [&](int i) { return static_cast<long long>(std::floor(i * balance)); };
    return cum(index + 1) > cum(index) ? 1 : 0;
}

std::vector<AnnotatedSample> generate_split(const PhantomConfig& cfg, int count,
                                            std::uint64_t seed, std::uint64_t split_tag,
                                            const std::string& prefix) {
    std::vector<AnnotatedSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const int label = phantom_label(i, cfg.class_balance);
        Rng rng = Rng::derive(seed, split_tag, static_cast<std::uint64_t>(i));
        auto p = render_phantom(cfg, label, rng);
        char id[64];
        std::snprintf(id, sizeof(id), "%s_%05d", prefix.c_str(), i);
        out.push_back(phantom_to_sample(std::move(p), label, id));
    }
    return out;
}

} // namespace

DatasetSplit generate_phantom_dataset(const PhantomConfig& cfg, const SplitCounts& counts,
                                      std::uint64_t seed) {
    cfg.validate();
    if (counts.train <= 0 || counts.validation <= 0 || counts.test <= 0)
        throw std::invalid_argument("generate_phantom_dataset: counts must be positive");
    DatasetSplit split;
    split.train = generate_split(cfg, counts.train, seed, 1, "train");
    split.validation = generate_split(cfg, counts.validation, seed, 2, "val");
    split.test = generate_split(cfg, counts.test, seed, 3, "test");
    const double total = counts.train + counts.validation + counts.test;
    split.split_ratio = {counts.train / total, counts.validation / total, counts.test / total};
    return split;
}

// ---------------------------------------------------------------------------
// phantom config file (key = value lines)

PhantomConfig phantom_config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open phantom config: " + path);
    PhantomConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "image_size") cfg.image_size = std::stoi(value);
            else if (key == "n_layers") cfg.n_layers = std::stoi(value);
            else if (key == "blob_count_min") cfg.blob_count_min = std::stoi(value);
            else if (key == "blob_count_max") cfg.blob_count_max = std::stoi(value);
            else if (key == "blob_axis_min") cfg.blob_axis_min = std::stod(value);
            else if (key == "blob_axis_max") cfg.blob_axis_max = std::stod(value);
            else if (key == "speckle_sigma") cfg.speckle_sigma = std::stod(value);
            else if (key == "class_balance") cfg.class_balance = std::stod(value);
            else throw std::runtime_error("unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    cfg.validate();
    return cfg;
}

void phantom_config_to_file(const PhantomConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write phantom config: " + path);
    f << "image_size = " << cfg.image_size << "\n"
      << "n_layers = " << cfg.n_layers << "\n"
      << "blob_count_min = " << cfg.blob_count_min << "\n"
      << "blob_count_max = " << cfg.blob_count_max << "\n"
      << "blob_axis_min = " << cfg.blob_axis_min << "\n"
      << "blob_axis_max = " << cfg.blob_axis_max << "\n"
      << "speckle_sigma = " << cfg.speckle_sigma << "\n"
      << "class_balance = " << cfg.class_balance << "\n";
}

// ---------------------------------------------------------------------------
// manifest ingestion / export

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

int parse_label(const std::string& s, const std::string& sample_id) {
    if (s == "0" || s == "normal") return 0;
    if (s == "1" || s == "diseased") return 1;
    throw std::runtime_error("unknown label '" + s + "' for sample " + sample_id);
}

} // namespace

DatasetSplit load_dataset(const std::string& root, const std::string& manifest) {
    std::ifstream f(manifest);
    if (!f) throw std::runtime_error("cannot open manifest: " + manifest);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("manifest is empty: " + manifest);
    {
        auto header = split_csv_line(line);
        if (header.size() < 4 || header[0] != "sample_id" || header[1] != "split" ||
            header[2] != "label" || header[3] != "image_path")
            throw std::runtime_error(
                "manifest header must be sample_id,split,label,image_path[,mask_path]");
    }

    DatasetSplit out;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cols = split_csv_line(line);
        if (cols.size() < 4)
            throw std::runtime_error(manifest + ":" + std::to_string(lineno) + ": too few columns");
        AnnotatedSample s;
        s.sample_id = cols[0];
        s.label = parse_label(cols[2], s.sample_id);
        s.image = load_image_png((fs::path(root) / cols[3]).string());
        if (cols.size() >= 5 && !cols[4].empty()) {
            s.mask = load_mask_png((fs::path(root) / cols[4]).string());
            s.annotation_type = AnnotationType::accurate;
            if (s.mask->h != s.image.h || s.mask->w != s.image.w)
                throw std::runtime_error("mask shape mismatch for sample " + s.sample_id);
            if (s.label == 0 && mask_area(*s.mask) != 0)
                throw std::runtime_error("normal sample " + s.sample_id + " has a nonempty mask");
        }
        if (cols[1] == "train") out.train.push_back(std::move(s));
        else if (cols[1] == "validation" || cols[1] == "val") out.validation.push_back(std::move(s));
        else if (cols[1] == "test") out.test.push_back(std::move(s));
        else
            throw std::runtime_error(manifest + ":" + std::to_string(lineno) + ": unknown split '" +
                                     cols[1] + "'");
    }
    const double total =
        static_cast<double>(out.train.size() + out.validation.size() + out.test.size());
    if (total > 0)
        out.split_ratio = {out.train.size() / total, out.validation.size() / total,
                           out.test.size() / total};
    return out;
}

void save_dataset(const DatasetSplit& split, const std::string& root, bool force) {
    const fs::path base(root);
    const fs::path manifest = base / "manifest.csv";
    if (fs::exists(manifest) && !force)
        throw std::runtime_error("refusing to overwrite existing dataset at " + root +
                                 " (use force)");
    fs::create_directories(base / "images");
    fs::create_directories(base / "masks");
    std::ofstream mf(manifest, std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write manifest: " + manifest.string());
    mf << "sample_id,split,label,image_path,mask_path\n";
    auto dump = [&](const std::vector<AnnotatedSample>& samples, const std::string& split_name) {
        for (const auto& s : samples) {
            const std::string img_rel = "images/" + s.sample_id + ".png";
            save_image_png(s.image, (base / img_rel).string());
            std::string mask_rel;
            if (s.mask) {
                mask_rel = "masks/" + s.sample_id + ".png";
                save_mask_png(*s.mask, (base / mask_rel).string());
            }
            mf << s.sample_id << ',' << split_name << ',' << s.label << ',' << img_rel << ','
               << mask_rel << '\n';
        }
    };
    dump(split.train, "train");
    dump(split.validation, "validation");
    dump(split.test, "test");
}

} // namespace camkit
