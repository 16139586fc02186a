#include "maploop/seg_gate.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "maploop/errors.hpp"
#include "maploop/geojson.hpp"
#include "maploop/kernels.hpp"
#include "maploop/pgm.hpp"

namespace maploop {

// ---- losses ------------------------------------------------------------------

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double bce_with_logits(double logit, double target) {
    // softplus(x) = max(x, 0) + log1p(exp(-|x|))
    const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
    return softplus - target * logit;
}

namespace {

void check_pairs(std::span<const double> logits, std::span<const double> targets, const char* what) {
    if (logits.empty()) {
        throw ContractError(std::string("empty ") + what + " batch");
    }
    require(logits.size() == targets.size(), std::string(what) + " logits and targets differ in length");
    for (double t : targets) {
        require(t == 0.0 || t == 1.0, std::string(what) + " targets must be 0 or 1");
    }
}

double mean_bce(std::span<const double> logits, std::span<const double> targets, const char* what) {
    check_pairs(logits, targets, what);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        sum += bce_with_logits(logits[i], targets[i]);
    }
    return sum / static_cast<double>(logits.size());
}

std::vector<double> bce_gradient(std::span<const double> logits, std::span<const double> targets, const char* what) {
    check_pairs(logits, targets, what);
    const double scale = 1.0 / static_cast<double>(logits.size());
    std::vector<double> g(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        g[i] = (sigmoid(logits[i]) - targets[i]) * scale;
    }
    return g;
}

} // namespace

double loss_seg(const LossBatch& b) { return mean_bce(b.seg_logits, b.seg_targets, "segmentation"); }
double loss_det(const LossBatch& b) { return mean_bce(b.det_logits, b.det_targets, "detection"); }
double loss_total(const LossBatch& b) { return loss_seg(b) + loss_det(b); }

std::vector<double> loss_seg_gradient(const LossBatch& b) {
    return bce_gradient(b.seg_logits, b.seg_targets, "segmentation");
}
std::vector<double> loss_det_gradient(const LossBatch& b) {
    return bce_gradient(b.det_logits, b.det_targets, "detection");
}

// ---- synthetic oracle ---------------------------------------------------------

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream: value k of the stream keyed by (seed, generation, tile, lane).
class HashStream {
public:
    HashStream(std::uint64_t seed, std::uint64_t generation, TileIndex tile, std::uint64_t lane) {
        key_ = splitmix(seed);
        key_ = splitmix(key_ ^ generation);
        key_ = splitmix(key_ ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(tile.row)) << 32 |
                                static_cast<std::uint32_t>(tile.col)));
        key_ = splitmix(key_ ^ lane);
    }
    std::uint64_t at(std::uint64_t k) const { return splitmix(key_ ^ splitmix(k)); }
    // Uniform in [0,1).
    double uniform(std::uint64_t k) const { return static_cast<double>(at(k) >> 11) * 0x1.0p-53; }

private:
    std::uint64_t key_ = 0;
};

constexpr std::uint64_t kNoiseLane = 1;
constexpr std::uint64_t kBlobLane = 2;
constexpr float kBlobValue = 0.8f;

ProbMap box_blur(const BinaryMask& truth, int radius) {
    const int w = truth.width();
    const int h = truth.height();
    std::vector<float> values(truth.size());
    if (radius <= 0) {
        std::transform(truth.values().begin(), truth.values().end(), values.begin(),
                       [](std::uint8_t b) { return static_cast<float>(b); });
        return ProbMap(w, h, std::move(values));
    }
    // Horizontal then vertical running sums of integer counts; zero outside.
    std::vector<int> horiz(truth.size(), 0);
    for (int y = 0; y < h; ++y) {
        const auto row = truth.row(y);
        int sum = 0;
        for (int x = 0; x < std::min(radius, w); ++x) {
            sum += row[x];
        }
        for (int x = 0; x < w; ++x) {
            if (x + radius < w) {
                sum += row[x + radius];
            }
            if (x - radius - 1 >= 0) {
                sum -= row[x - radius - 1];
            }
            horiz[static_cast<std::size_t>(y) * w + x] = sum;
        }
    }
    const float inv = 1.0f / static_cast<float>((2 * radius + 1) * (2 * radius + 1));
    std::vector<int> col(static_cast<std::size_t>(w), 0);
    for (int y = 0; y < std::min(radius, h); ++y) {
        for (int x = 0; x < w; ++x) {
            col[x] += horiz[static_cast<std::size_t>(y) * w + x];
        }
    }
    for (int y = 0; y < h; ++y) {
        if (y + radius < h) {
            for (int x = 0; x < w; ++x) {
                col[x] += horiz[static_cast<std::size_t>(y + radius) * w + x];
            }
        }
        if (y - radius - 1 >= 0) {
            for (int x = 0; x < w; ++x) {
                col[x] -= horiz[static_cast<std::size_t>(y - radius - 1) * w + x];
            }
        }
        for (int x = 0; x < w; ++x) {
            values[static_cast<std::size_t>(y) * w + x] = std::min(1.0f, static_cast<float>(col[x]) * inv);
        }
    }
    return ProbMap(w, h, std::move(values));
}

} // namespace

ProbMap synthetic_prob_map(const BinaryMask& truth, const ProviderState& state, TileIndex tile) {
    require(state.kind == ProviderKind::synthetic_oracle, "synthetic_prob_map needs a synthetic oracle provider");
    require(state.noise_sigma >= 0.0, "noise_sigma must be non-negative");
    ProbMap map = box_blur(truth, state.blur_radius);
    const int w = map.width();
    const int h = map.height();

    if (state.false_blob_rate > 0.0 && w > 0 && h > 0) {
        const HashStream blobs(state.seed, state.generation, tile, kBlobLane);
        const double whole = std::floor(state.false_blob_rate);
        const double frac = state.false_blob_rate - whole;
        const auto count = static_cast<std::uint64_t>(whole) + (blobs.uniform(0) < frac ? 1 : 0);
        for (std::uint64_t b = 0; b < count; ++b) {
            const int cx = static_cast<int>(blobs.uniform(4 * b + 1) * w);
            const int cy = static_cast<int>(blobs.uniform(4 * b + 2) * h);
            const int r = 2 + static_cast<int>(blobs.uniform(4 * b + 3) * 5);  // 2..6
            for (int y = std::max(0, cy - r); y <= std::min(h - 1, cy + r); ++y) {
                for (int x = std::max(0, cx - r); x <= std::min(w - 1, cx + r); ++x) {
                    if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
                        map.set(x, y, std::max(map.at(x, y), kBlobValue));
                    }
                }
            }
        }
    }

    if (state.noise_sigma > 0.0) {
        const HashStream noise(state.seed, state.generation, tile, kNoiseLane);
        const auto sigma = static_cast<float>(state.noise_sigma);
        std::vector<float> offsets(map.size());
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            offsets[i] = sigma * static_cast<float>(2.0 * noise.uniform(i) - 1.0);
        }
        kernels::active().add_clamp(map.mutable_values().data(), offsets.data(), offsets.size());
    }
    return map;
}

double detection_score(const DetectionHead& head, const BinaryMask& truth) {
    switch (head.detector) {
    case DetectorKind::perfect:
        return truth.any() ? 1.0 : 0.0;
    case DetectorKind::coverage: {
        if (truth.size() == 0) {
            return 0.0;
        }
        const double fraction = static_cast<double>(truth.popcount()) / static_cast<double>(truth.size());
        return std::min(1.0, head.coverage_gain * fraction);
    }
    }
    return 0.0;
}

std::filesystem::path provider_tile_path(const std::filesystem::path& directory, TileIndex tile) {
    return directory / ("tile_" + std::to_string(tile.row) + "_" + std::to_string(tile.col) + ".pgm");
}

ProbMap provider_tile(const ProviderState& state, TileIndex tile, const BinaryMask* truth, int tile_size) {
    if (state.kind == ProviderKind::synthetic_oracle) {
        require(truth != nullptr, "synthetic oracle provider needs the truth tile");
        return synthetic_prob_map(*truth, state, tile);
    }
    const auto path = provider_tile_path(state.directory, tile);
    if (!std::filesystem::exists(path)) {
        throw IoError("provider tile missing: " + path.string());
    }
    ProbMap map = read_prob_pgm(path);
    require(map.width() == tile_size && map.height() == tile_size, "provider tile has the wrong size");
    return map;
}

TileInference infer_tile(const ProviderState& state, const DetectionHead& head, TileIndex tile,
                         const BinaryMask* truth, int tile_size) {
    require(head.theta >= 0.0 && head.theta <= 1.0, "theta must lie in [0,1]");
    TileInference out;
    if (state.kind == ProviderKind::file_backed) {
        const auto it = state.det_scores.find({tile.row, tile.col});
        out.det_score = it != state.det_scores.end() ? it->second
                        : truth != nullptr           ? detection_score(head, *truth)
                                                     : 1.0;
    } else {
        require(truth != nullptr, "synthetic oracle provider needs the truth tile");
        out.det_score = detection_score(head, *truth);
    }
    if (out.det_score < head.theta) {
        out.exited_early = true;
        out.prob = ProbMap(tile_size, tile_size);
        return out;
    }
    out.prob = provider_tile(state, tile, truth, tile_size);
    return out;
}

ProviderState update_model(const ProviderState& state, std::span<const VerifiedTile> newly_verified) {
    require(!newly_verified.empty(), "update_model needs at least one verified tile");
    ProviderState next = state;
    next.generation = state.generation + 1;
    if (state.kind == ProviderKind::synthetic_oracle) {
        next.noise_sigma = std::max(state.sigma_floor, state.noise_sigma * state.gamma);
        if (state.noise_sigma < state.sigma_floor) {
            next.noise_sigma = state.noise_sigma;  // already below the floor: never raise it
        }
        next.false_blob_rate = std::max(state.blob_rate_floor, state.false_blob_rate * state.gamma);
        if (state.false_blob_rate < state.blob_rate_floor) {
            next.false_blob_rate = state.false_blob_rate;
        }
    }
    return next;
}

ProviderState load_file_provider(const std::filesystem::path& directory, DetectionHead& head) {
    const auto meta_path = directory / "provider.json";
    nlohmann::json meta = nlohmann::json::parse(read_text_file(meta_path), nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) {
        throw ContractError("invalid provider.json in " + directory.string());
    }
    ProviderState state;
    state.kind = ProviderKind::file_backed;
    state.directory = directory;
    state.generation = meta.value("generation", std::uint64_t{0});
    head.theta = meta.value("theta", head.theta);
    if (meta.contains("det_scores")) {
        for (const auto& [key, value] : meta["det_scores"].items()) {
            const auto sep = key.find('_');
            require(sep != std::string::npos, "det_scores keys must be '<row>_<col>'");
            state.det_scores[{std::stoi(key.substr(0, sep)), std::stoi(key.substr(sep + 1))}] = value.get<double>();
        }
    }
    return state;
}

} // namespace maploop
