#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppf/codec.hpp"
#include "ppf/layers.hpp"
#include "ppf/serialize.hpp"
#include "ppf/tensor.hpp"

namespace ppf {

// Topology description of one post-processing filter: an autoencoder with
// `depth` stride-2 stages, `res_blocks` residual blocks at the bottleneck,
// lateral connections from each encoder resolution into the decoder, a
// one-hot QP indicator expanded to constant input planes, and a global
// residual skip from input to output.
struct FilterArch {
    int base_channels = 16;
    int depth = 2;
    int res_blocks = 3;
    int qp_channels = 7;
    int in_channels = 1;

    int spatial_divisor() const { return 1 << depth; }
    int bottleneck_channels() const { return base_channels << depth; }
    int layer_count() const { return 1 + depth + 2 * res_blocks + 2 * depth + 1; }
    bool operator==(const FilterArch&) const = default;
    void validate() const;
};

// Parameters of one filter in a bank.
struct FilterParams {
    std::vector<LayerParams> layers;
    int id = 0;  // 1-based index within the bank
};

using FilterGrads = std::vector<LayerGrads>;

// Zero-valued parameter set matching the architecture.
std::vector<LayerParams> make_filter_layers(const FilterArch& arch);
std::string filter_layer_name(const FilterArch& arch, std::size_t index);

// Seeded He initialization; the final output conv stays zero so a fresh
// filter is an exact identity.
FilterParams init_filter(const FilterArch& arch, int id, std::uint64_t seed);

FilterGrads zero_grads(const FilterParams& f);

// The QP indicator as qp_channels constant planes (one-hot across channels).
Tensor4 qp_planes(QpLevel qp, int n, int h, int w, int qp_channels = 7);

// Cached intermediate activations of one forward pass.
struct FilterTrace {
    Tensor4 input;
    Tensor4 cat_in;
    Tensor4 head_pre, head_act;
    std::vector<Tensor4> enc_pre, enc_act;
    std::vector<Tensor4> res_in, res_mid_pre, res_mid_act, res_out_pre;
    Tensor4 bottleneck_out;
    std::vector<Tensor4> up_pre, up_act, fused_cat, fuse_pre, fuse_act;
    Tensor4 out_pre;
};

// Forward pass; spatial dims must be divisible by 2^depth.
Tensor4 filter_forward_traced(const Tensor4& rec, QpLevel qp, const FilterParams& f,
                              const FilterArch& arch, FilterTrace& trace);
ImagePlane filter_forward(const ImagePlane& rec, QpLevel qp, const FilterParams& f,
                          const FilterArch& arch);

// Accumulates parameter gradients into `grads`; optionally returns the
// gradient w.r.t. the reconstructed input.
void filter_backward(const FilterTrace& trace, const Tensor4& upstream, const FilterParams& f,
                     const FilterArch& arch, FilterGrads& grads,
                     Tensor4* input_grad = nullptr);

// Replication-pads to the dim-divisibility requirement and crops back.
ImagePlane filter_apply_padded(const ImagePlane& rec, QpLevel qp, const FilterParams& f,
                               const FilterArch& arch);

// M filters sharing one architecture.
struct FilterBank {
    FilterArch arch;
    std::vector<FilterParams> filters;
    int size() const { return static_cast<int>(filters.size()); }
};

FilterBank init_bank(const FilterArch& arch, int filters, std::uint64_t base_seed,
                     bool distinct_seeds = true);

// Bank container ("FBNK"): arch header followed by one layer-list block
// per filter. Round-trips bit-exactly.
void save_bank(ByteWriter& w, const FilterBank& bank);
FilterBank load_bank(ByteReader& r);
void save_bank_file(const std::string& path, const FilterBank& bank);
FilterBank load_bank_file(const std::string& path);

}  // namespace ppf
