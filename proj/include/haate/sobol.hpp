#pragma once
// Sobol low-discrepancy sequence and the precomputed-draw deployment path:
// a small table of well-spread Dirichlet probability vectors is built once
// (inverse gamma CDF per coordinate, then simplex normalization), and
// clusters are mapped onto table rows by keyed hashing of their identifiers.
//
// Direction numbers: the classic primitive-polynomial set for 36 dimensions.
// Dimensions 1..6 use the standard published initial values; higher
// dimensions use deterministically generated odd initials, which preserves
// the digital-net property (any odd m_j < 2^j is admissible).

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "haate/core.hpp"
#include "haate/randomize.hpp"
#include "haate/rng.hpp"
#include "haate/special.hpp"

namespace haate {

inline constexpr int sobol_max_dimensions = 36;
inline constexpr int sobol_bits = 31;
inline constexpr const char* sobol_table_id = "bf36-v1";

class SobolSequence {
public:
    explicit SobolSequence(int dimensions) : dim_(dimensions) {
        if (dimensions < 1 || dimensions > sobol_max_dimensions)
            throw Error(Errc::dimension_unsupported,
                        "sobol: supported dimensions are 1.." + std::to_string(sobol_max_dimensions));
        directions_.assign(static_cast<std::size_t>(dim_) * sobol_bits, 0);
        for (int d = 0; d < dim_; ++d) init_dimension(d);
        state_.assign(static_cast<std::size_t>(dim_), 0);
        counter_ = 0;
    }

    int dimensions() const noexcept { return dim_; }

    // next point of the sequence in Gray-code order; the all-zeros point at
    // index 0 is skipped, so the first emitted point is (0.5, ..., 0.5)
    void next(std::span<double> out) {
        const std::uint64_t idx = ++counter_;
        const int bit = std::countr_zero(idx);
        if (bit >= sobol_bits) throw Error(Errc::out_of_range, "sobol: sequence exhausted");
        for (int d = 0; d < dim_; ++d) {
            state_[d] ^= directions_[static_cast<std::size_t>(d) * sobol_bits + bit];
            out[d] = static_cast<double>(state_[d]) * 0x1.0p-31;
        }
    }

private:
    static constexpr std::array<int, sobol_max_dimensions> poly_degree = {
        1, 2, 3, 3, 4, 4, 5, 5, 5, 5, 5, 5, 6, 6, 6, 6, 6, 6,
        7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7};
    static constexpr std::array<int, sobol_max_dimensions> poly_value = {
        0, 1,  1,  2,  1,  4,  2,  4,  7,  11, 13, 14, 1,  13, 16, 19, 22, 25,
        1, 4,  7,  8,  14, 19, 21, 28, 31, 32, 37, 41, 42, 50, 55, 56, 59, 62};

    // published initial m values for the first six dimensions
    static constexpr std::array<std::array<std::uint32_t, 4>, 6> initial_m = {{
        {1, 0, 0, 0},
        {1, 1, 0, 0},
        {1, 3, 7, 0},
        {1, 3, 3, 0},
        {1, 1, 3, 13},
        {1, 1, 5, 9},
    }};

    void init_dimension(int d) {
        const int degree = poly_degree[static_cast<std::size_t>(d)];
        std::uint32_t* v = directions_.data() + static_cast<std::size_t>(d) * sobol_bits;

        for (int j = 0; j < degree; ++j) {
            std::uint32_t m;
            if (d < 6) {
                m = initial_m[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)];
            } else if (j == 0) {
                m = 1;
            } else {
                // deterministic odd m_j < 2^j
                const std::uint64_t h = mix64(0x536f626f6cULL + 131ULL * static_cast<std::uint64_t>(d) + j);
                m = static_cast<std::uint32_t>(h % (1u << j)) * 2u + 1u;
            }
            v[j] = m << (sobol_bits - 1 - j);
        }
        for (int j = degree; j < sobol_bits; ++j) {
            std::uint32_t value = v[j - degree];
            value ^= value >> degree;
            int poly = poly_value[static_cast<std::size_t>(d)];
            for (int l = j - degree + 1; l < j; ++l) {
                if (poly & 1) value ^= v[l];
                poly >>= 1;
            }
            v[j] = value;
        }
    }

    int dim_;
    std::vector<std::uint32_t> directions_;
    std::vector<std::uint32_t> state_;
    std::uint64_t counter_ = 0;
};

// K precomputed probability vectors on the (M+1)-simplex interior.
struct SobolDrawTable {
    int K = 0;
    int M = 0;
    std::vector<double> vectors;  // K x (M+1), row-major
    std::string direction_set = sobol_table_id;

    double at(int row, int m) const { return vectors[static_cast<std::size_t>(row) * (M + 1) + m]; }
    std::span<const double> row(int r) const {
        return {vectors.data() + static_cast<std::size_t>(r) * (M + 1), static_cast<std::size_t>(M + 1)};
    }
};

// Maps the first K Sobol points (zero point skipped) through the inverse
// Gamma(alpha_m, 1) CDF per coordinate and normalizes onto the simplex.
// Under i.i.d. uniform inputs this map is exactly Dirichlet(alpha); under
// Sobol inputs it inherits the low-discrepancy spread coordinate-wise.
inline SobolDrawTable build_sobol_table(const DesignSpec& spec, int K) {
    validate_design(spec);
    if (K < 1) throw Error(Errc::out_of_range, "build_sobol_table: K must be >= 1");
    const int dims = spec.arms();
    SobolSequence seq(dims);  // throws dimension_unsupported when too wide

    SobolDrawTable table;
    table.K = K;
    table.M = spec.M;
    table.vectors.resize(static_cast<std::size_t>(K) * dims);
    std::vector<double> u(dims);
    std::vector<double> log_q(dims);
    for (int r = 0; r < K; ++r) {
        seq.next(u);
        for (int d = 0; d < dims; ++d) {
            const double ud = std::max(u[d], 0x1.0p-64);
            log_q[d] = inv_reg_lower_gamma_log(spec.alpha[static_cast<std::size_t>(d)], ud);
        }
        std::span<double> row{table.vectors.data() + static_cast<std::size_t>(r) * dims,
                              static_cast<std::size_t>(dims)};
        detail::log_draws_to_simplex(log_q, row);
    }
    return table;
}

// Deployment-path assignment over opaque cluster identifiers with possibly
// unequal cluster sizes. Duplicate identifiers map to the same table row and
// the same labels by construction.
struct DeployedAssignment {
    int M = 0;
    std::vector<std::string> cluster_ids;
    std::vector<int> unit_counts;
    std::vector<int> row_index;                    // table row per cluster
    std::vector<std::vector<std::int32_t>> labels;  // ragged, one vector per cluster
};

inline DeployedAssignment assign_from_table(const std::vector<std::string>& cluster_ids,
                                            const std::vector<int>& unit_counts,
                                            const SobolDrawTable& table, RngStream stream) {
    if (table.K < 1 || table.vectors.empty())
        throw Error(Errc::empty_table, "assign_from_table: table is empty");
    if (cluster_ids.size() != unit_counts.size())
        throw Error(Errc::index_out_of_range, "assign_from_table: ids/sizes length mismatch");

    DeployedAssignment out;
    out.M = table.M;
    out.cluster_ids = cluster_ids;
    out.unit_counts = unit_counts;
    out.row_index.resize(cluster_ids.size());
    out.labels.resize(cluster_ids.size());
    for (std::size_t j = 0; j < cluster_ids.size(); ++j) {
        if (unit_counts[j] < 1)
            throw Error(Errc::out_of_range, "assign_from_table: unit counts must be >= 1");
        const std::uint64_t id_hash = fnv1a64(cluster_ids[j], mix64(stream.seed));
        out.row_index[j] = static_cast<int>(hash_combine(id_hash, stream.stream_id) %
                                            static_cast<std::uint64_t>(table.K));
        auto probs = table.row(out.row_index[j]);
        Rng rng(stream.derived(id_hash));
        auto& row_labels = out.labels[j];
        row_labels.resize(static_cast<std::size_t>(unit_counts[j]));
        for (auto& lab : row_labels)
            lab = static_cast<std::int32_t>(detail::draw_categorical(probs, rng));
    }
    return out;
}

}  // namespace haate
