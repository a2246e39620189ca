#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camkit/grid.hpp"
#include "camkit/rng.hpp"

namespace camkit {

enum class AnnotationType { accurate, bbox, random_patch, whole_image, none };

std::string to_string(AnnotationType t);
AnnotationType annotation_type_from_string(const std::string& s);

/// One grayscale image with a binary class label and an optional region mask.
/// Invariants: a present mask matches the image shape; normal samples carry
/// only all-zero masks; annotation_type is none exactly when mask is absent.
struct AnnotatedSample {
    Image image;
    int label = 0; // 0 normal, 1 diseased
    std::optional<Mask> mask;
    AnnotationType annotation_type = AnnotationType::none;
    std::string sample_id;

    bool annotated() const { return mask.has_value(); }
    void validate() const;
};

struct DatasetSplit {
    std::vector<AnnotatedSample> train, validation, test;
    std::array<double, 3> split_ratio{0.60, 0.25, 0.15};
};

/// Sentinel R for the unannotated baseline (Q = 0).
inline constexpr int kBaselineRatio = std::numeric_limits<int>::max();

/// A training split after applying the 1:R annotation ratio: Q of the P
/// samples keep their masks, the rest are stripped to labels only.
struct MixedAnnotationDataset {
    std::vector<AnnotatedSample> samples;
    long long P = 0;
    long long Q = 0;
    int R = 1;
    std::uint64_t seed = 0;
};

/// Defaults follow the 60:25:15 split ratio.
struct SplitCounts {
    int train = 600;
    int validation = 250;
    int test = 150;
};

/// Synthetic layered-band phantom: bright horizontal layers over a dark
/// background with multiplicative speckle; diseased samples carry dark
/// elliptical blobs inside the band, and the blob union is the mask.
struct PhantomConfig {
    int image_size = 96;
    int n_layers = 4;
    int blob_count_min = 1;
    int blob_count_max = 2;
    double blob_axis_min = 6.0;  // ellipse semi-axis, pixels
    double blob_axis_max = 13.0;
    double speckle_sigma = 0.14;
    double class_balance = 0.5; // fraction diseased

    void validate() const;
};

PhantomConfig phantom_config_from_file(const std::string& path);
void phantom_config_to_file(const PhantomConfig& cfg, const std::string& path);

/// Geometry of one rendered phantom, exposed so tests can check blob
/// containment against the generator's own coordinates.
struct PhantomEllipse {
    double cy, cx, ry, rx, angle;
};
struct PhantomSample {
    Image image;
    Mask mask;
    int band_top = 0;    // first band row
    int band_bottom = 0; // last band row, inclusive
    std::vector<PhantomEllipse> blobs;
};

PhantomSample render_phantom(const PhantomConfig& cfg, int label, Rng& rng);

/// Deterministic under (config, counts, seed); per-sample RNG streams are
/// derived from (seed, split, index) so samples are independent of order.
DatasetSplit generate_phantom_dataset(const PhantomConfig& cfg, const SplitCounts& counts,
                                      std::uint64_t seed);

/// Extracts the contiguous row band whose row sums exceed
/// threshold_fraction * max(row sums). target_size 0 keeps the band as-is,
/// otherwise the band is rescaled to target_size x target_size.
Image preprocess_crop_layers(const Image& image, double threshold_fraction, int target_size = 0);

/// Variant that crops the sample's mask identically.
AnnotatedSample preprocess_crop_layers(const AnnotatedSample& s, double threshold_fraction,
                                       int target_size = 0);

/// Applies the 1:R ratio: exactly Q = round(P/R) samples keep masks. The
/// keepers are drawn uniformly without replacement, stratified by class.
/// Pass kBaselineRatio for the Q = 0 baseline.
MixedAnnotationDataset make_mixed_annotation(const std::vector<AnnotatedSample>& train, int R,
                                             std::uint64_t seed);

/// Degrades one mask: accurate keeps it, bbox replaces every connected
/// component by its tight box, random_patch relocates area-matched
/// rectangles uniformly at random, whole_image returns all ones.
Mask degrade_annotation(const Mask& mask, AnnotationType mode, std::uint64_t seed);

/// Manifest-driven ingestion. Rows: sample_id,split,label,image_path[,mask_path]
DatasetSplit load_dataset(const std::string& root, const std::string& manifest);

/// Writes images/masks as PNG plus the manifest; refuses to overwrite an
/// existing tree unless force is set.
void save_dataset(const DatasetSplit& split, const std::string& root, bool force = false);

} // namespace camkit
