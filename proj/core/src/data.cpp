#include "fcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fcl/errors.hpp"

namespace fcl {

namespace {

// Seed-derivation tags so the template, pattern, and noise streams never
// overlap even for adjacent ids.
constexpr std::uint64_t kTagTemplates = 0x7e4d;
constexpr std::uint64_t kTagSubject = 0x51b7;
constexpr std::uint64_t kTagNoise = 0x6013;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Per-pixel uniform noise image. Subject patterns use this: they are
// spatially incoherent, so cropped views of one slice do not agree on them
// and contrastive training cannot lean on subject identity.
Vec64 random_rough_image(std::size_t side, Rng& rng) {
    Vec64 img(side * side);
    for (double& p : img) {
        p = rng.uniform();
    }
    return img;
}

// Smooth random field: a coarse uniform grid upsampled bilinearly. Partition
// templates use this: spatial coherence (like the volumetric images they
// stand in for) keeps cropped views of one slice consistent in content.
Vec64 random_smooth_image(std::size_t side, Rng& rng) {
    const std::size_t coarse = std::min<std::size_t>(3, side);
    std::vector<double> grid(coarse * coarse);
    for (double& g : grid) {
        g = rng.uniform();
    }
    Vec64 img(side * side);
    if (coarse == 1 || side == 1) {
        for (double& p : img) {
            p = grid[0];
        }
        return img;
    }
    const double scale = static_cast<double>(coarse - 1) / static_cast<double>(side - 1);
    for (std::size_t r = 0; r < side; ++r) {
        const double u = static_cast<double>(r) * scale;
        const std::size_t r0 = std::min(static_cast<std::size_t>(u), coarse - 2);
        const double fu = u - static_cast<double>(r0);
        for (std::size_t c = 0; c < side; ++c) {
            const double v = static_cast<double>(c) * scale;
            const std::size_t c0 = std::min(static_cast<std::size_t>(v), coarse - 2);
            const double fv = v - static_cast<double>(c0);
            const double top = (1.0 - fv) * grid[r0 * coarse + c0] + fv * grid[r0 * coarse + c0 + 1];
            const double bottom =
                (1.0 - fv) * grid[(r0 + 1) * coarse + c0] + fv * grid[(r0 + 1) * coarse + c0 + 1];
            img[r * side + c] = (1.0 - fu) * top + fu * bottom;
        }
    }
    return img;
}

// Pearson correlation across pixels of two slices.
double pixel_correlation(const Vec64& a, const Vec64& b) {
    const std::size_t n = a.size();
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    const double denom = std::sqrt(var_a * var_b);
    return denom > 0.0 ? cov / denom : 0.0;
}

}  // namespace

std::uint16_t PartitionSpec::partition_of(std::size_t slice_index) const {
    return static_cast<std::uint16_t>(slice_index * partitions / slices_per_volume);
}

std::vector<std::size_t> PartitionSpec::slices_in_partition(std::uint16_t partition) const {
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < slices_per_volume; ++i) {
        if (partition_of(i) == partition) {
            indices.push_back(i);
        }
    }
    return indices;
}

void SyntheticConfig::validate() const {
    if (num_clients < 1 || volumes_per_client < 1 || slices_per_volume < 1 || partitions < 1 ||
        image_side < 1) {
        throw ConfigError("SyntheticConfig: all counts must be >= 1");
    }
    if (template_strength < 0.0 || template_strength > 1.0) {
        throw ConfigError("SyntheticConfig: template_strength must lie in [0, 1]");
    }
    if (noise_sigma < 0.0) {
        throw ConfigError("SyntheticConfig: noise_sigma must be >= 0");
    }
    if (slices_per_volume < partitions) {
        throw ConfigError("SyntheticConfig: slices_per_volume must be >= partitions");
    }
}

std::vector<std::vector<Volume>> generate_dataset(const SyntheticConfig& cfg) {
    cfg.validate();
    const std::size_t pixels = cfg.input_dim();
    const PartitionSpec spec = cfg.partition_spec();

    Rng template_rng(derive_seed(cfg.seed, {kTagTemplates}));
    std::vector<Vec64> templates;
    templates.reserve(cfg.partitions);
    for (std::size_t s = 0; s < cfg.partitions; ++s) {
        // The structural premise needs distinct partition content; redraw
        // templates that nearly duplicate an earlier one. Bounded attempts
        // keep generation total even for many partitions on tiny images.
        Vec64 candidate = random_smooth_image(cfg.image_side, template_rng);
        for (int attempt = 0; attempt < 64; ++attempt) {
            bool collides = false;
            for (const Vec64& existing : templates) {
                if (pixel_correlation(candidate, existing) > 0.6) {
                    collides = true;
                    break;
                }
            }
            if (!collides) {
                break;
            }
            candidate = random_smooth_image(cfg.image_side, template_rng);
        }
        templates.push_back(std::move(candidate));
    }

    std::vector<std::vector<Volume>> dataset(cfg.num_clients);
    for (std::size_t c = 0; c < cfg.num_clients; ++c) {
        dataset[c].reserve(cfg.volumes_per_client);
        for (std::size_t v = 0; v < cfg.volumes_per_client; ++v) {
            Rng pattern_rng(derive_seed(cfg.seed, {kTagSubject, c, v}));
            Rng noise_rng(derive_seed(cfg.seed, {kTagNoise, c, v}));
            const Vec64 pattern = random_rough_image(cfg.image_side, pattern_rng);

            Volume volume;
            volume.client_id = static_cast<std::uint32_t>(c);
            volume.volume_id = static_cast<std::uint32_t>(c * cfg.volumes_per_client + v);
            volume.image_side = cfg.image_side;
            volume.slices.reserve(cfg.slices_per_volume);
            for (std::size_t i = 0; i < cfg.slices_per_volume; ++i) {
                const Vec64& tmpl = templates[spec.partition_of(i)];
                Vec64 slice(pixels);
                for (std::size_t p = 0; p < pixels; ++p) {
                    slice[p] = clamp01(cfg.template_strength * tmpl[p] +
                                       (1.0 - cfg.template_strength) * pattern[p] +
                                       noise_rng.normal(0.0, cfg.noise_sigma));
                }
                volume.slices.push_back(std::move(slice));
            }
            dataset[c].push_back(std::move(volume));
        }
    }
    return dataset;
}

Vec64 augment(const Vec64& slice, std::size_t image_side, Rng& rng, double noise_sigma) {
    if (image_side < 4) {
        throw ContractError("augment: image_side must be >= 4");
    }
    if (slice.size() != image_side * image_side) {
        throw DimensionError("augment: slice length does not match image_side^2");
    }
    const std::size_t crop = image_side - 2;

    // Fixed draw order: crop offsets, flip, then per-pixel noise.
    const std::size_t off_r = rng.uniform_index(image_side - crop + 1);
    const std::size_t off_c = rng.uniform_index(image_side - crop + 1);
    const bool flip = rng.bernoulli(0.5);

    Vec64 out(slice.size());
    for (std::size_t r = 0; r < image_side; ++r) {
        const std::size_t src_r = off_r + (2 * r + 1) * crop / (2 * image_side);
        for (std::size_t c = 0; c < image_side; ++c) {
            std::size_t src_c = off_c + (2 * c + 1) * crop / (2 * image_side);
            if (flip) {
                src_c = off_c + crop - 1 - (src_c - off_c);
            }
            out[r * image_side + c] = slice[src_r * image_side + src_c];
        }
    }
    for (double& p : out) {
        p = clamp01(p + rng.normal(0.0, noise_sigma));
    }
    return out;
}

TrainingPair sample_training_pair(const std::vector<Volume>& shard, const PartitionSpec& spec,
                                  std::uint16_t partition, Rng& rng) {
    if (shard.size() < 2) {
        throw InsufficientDataError("sample_training_pair: shard holds " +
                                    std::to_string(shard.size()) + " volumes, need >= 2");
    }
    if (partition >= spec.partitions) {
        throw ContractError("sample_training_pair: partition out of range");
    }
    const std::vector<std::size_t> candidates = spec.slices_in_partition(partition);
    if (candidates.empty()) {
        throw InsufficientDataError("sample_training_pair: partition has no slices");
    }

    TrainingPair pair;
    pair.partition = partition;
    pair.volume_i = rng.uniform_index(shard.size());
    pair.volume_j = rng.uniform_index(shard.size() - 1);
    if (pair.volume_j >= pair.volume_i) {
        ++pair.volume_j;
    }
    pair.slice_i = candidates[rng.uniform_index(candidates.size())];
    pair.slice_j = candidates[rng.uniform_index(candidates.size())];
    return pair;
}

double structural_similarity_statistic(const std::vector<std::vector<Volume>>& dataset,
                                       const PartitionSpec& spec) {
    // Compare slices of distinct subjects (pooled across clients), bucketed
    // by whether the two slices share a partition.
    std::vector<const Volume*> subjects;
    for (const auto& shard : dataset) {
        for (const Volume& v : shard) {
            subjects.push_back(&v);
        }
    }
    double within_sum = 0.0;
    double cross_sum = 0.0;
    std::size_t within_n = 0;
    std::size_t cross_n = 0;
    for (std::size_t a = 0; a < subjects.size(); ++a) {
        for (std::size_t b = a + 1; b < subjects.size(); ++b) {
            for (std::size_t i = 0; i < subjects[a]->slices.size(); ++i) {
                for (std::size_t j = 0; j < subjects[b]->slices.size(); ++j) {
                    const double corr =
                        pixel_correlation(subjects[a]->slices[i], subjects[b]->slices[j]);
                    if (spec.partition_of(i) == spec.partition_of(j)) {
                        within_sum += corr;
                        ++within_n;
                    } else {
                        cross_sum += corr;
                        ++cross_n;
                    }
                }
            }
        }
    }
    if (within_n == 0 || cross_n == 0) {
        throw ContractError("structural_similarity_statistic: empty comparison bucket");
    }
    return within_sum / static_cast<double>(within_n) - cross_sum / static_cast<double>(cross_n);
}

}  // namespace fcl
