#include "ppf/filter.hpp"

#include <cmath>

#include "ppf/errors.hpp"
#include "ppf/rng.hpp"

namespace ppf {

namespace {

constexpr double kLeakySlope = 0.1;

// layer index helpers for the fixed topology:
//   [0]            head conv (in + qp planes -> C)
//   [1 .. depth]   stride-2 encoder convs
//   then 2 convs per residual block
//   then (up, fuse) per decoder stage, coarsest level first
//   [last]         output conv (C -> in_channels), zero-initialized
int res_base(const FilterArch& a) { return 1 + a.depth; }
int dec_base(const FilterArch& a) { return 1 + a.depth + 2 * a.res_blocks; }
int out_index(const FilterArch& a) { return a.layer_count() - 1; }

void check_filter(const FilterParams& f, const FilterArch& arch, const char* where) {
    if (static_cast<int>(f.layers.size()) != arch.layer_count())
        throw ConfigError(std::string(where) + ": filter has " +
                          std::to_string(f.layers.size()) + " layers, architecture needs " +
                          std::to_string(arch.layer_count()));
}

}  // namespace

void FilterArch::validate() const {
    if (base_channels < 1) throw ConfigError("FilterArch: base_channels must be >= 1");
    if (depth < 0) throw ConfigError("FilterArch: depth must be >= 0");
    if (res_blocks < 0) throw ConfigError("FilterArch: res_blocks must be >= 0");
    if (qp_channels != 7)
        throw ConfigError("FilterArch: qp_channels must be 7 (one-hot over the qp set)");
    if (in_channels < 1) throw ConfigError("FilterArch: in_channels must be >= 1");
}

std::vector<LayerParams> make_filter_layers(const FilterArch& arch) {
    arch.validate();
    const int c = arch.base_channels;
    std::vector<LayerParams> layers;
    layers.reserve(static_cast<std::size_t>(arch.layer_count()));
    layers.push_back(LayerParams::make(c, arch.in_channels + arch.qp_channels, 3, 1));
    for (int d = 0; d < arch.depth; ++d)
        layers.push_back(LayerParams::make(c << (d + 1), c << d, 3, 2));
    const int b = arch.bottleneck_channels();
    for (int r = 0; r < arch.res_blocks; ++r) {
        layers.push_back(LayerParams::make(b, b, 3, 1));
        layers.push_back(LayerParams::make(b, b, 3, 1));
    }
    for (int e = 0; e < arch.depth; ++e) {
        const int level = arch.depth - 1 - e;
        layers.push_back(
            LayerParams::make(c << level, c << (level + 1), 3, 2, LayerMode::transposed));
        layers.push_back(LayerParams::make(c << level, 2 * (c << level), 3, 1));
    }
    layers.push_back(LayerParams::make(arch.in_channels, c, 3, 1));
    return layers;
}

std::string filter_layer_name(const FilterArch& arch, std::size_t index) {
    const int i = static_cast<int>(index);
    if (i == 0) return "head";
    if (i < res_base(arch)) return "enc" + std::to_string(i - 1);
    if (i < dec_base(arch)) {
        const int r = (i - res_base(arch)) / 2;
        return "res" + std::to_string(r) + ((i - res_base(arch)) % 2 ? ".c2" : ".c1");
    }
    if (i < out_index(arch)) {
        const int e = (i - dec_base(arch)) / 2;
        const int level = arch.depth - 1 - e;
        return ((i - dec_base(arch)) % 2 ? "fuse" : "up") + std::to_string(level);
    }
    return "out";
}

FilterParams init_filter(const FilterArch& arch, int id, std::uint64_t seed) {
    FilterParams f;
    f.layers = make_filter_layers(arch);
    f.id = id;
    Rng rng(seed);
    // He fan-in scaling everywhere except the output conv, which stays
    // zero so the global skip makes the fresh filter an exact identity.
    for (std::size_t i = 0; i + 1 < f.layers.size(); ++i) {
        LayerParams& l = f.layers[i];
        const double sd = std::sqrt(2.0 / (l.in_ch * l.k * l.k));
        for (double& x : l.kernel) x = sd * rng.normal();
    }
    return f;
}

FilterGrads zero_grads(const FilterParams& f) {
    FilterGrads g;
    g.reserve(f.layers.size());
    for (const LayerParams& l : f.layers) g.push_back(LayerGrads::zeros_like(l));
    return g;
}

Tensor4 qp_planes(QpLevel qp, int n, int h, int w, int qp_channels) {
    Tensor4 t(n, qp_channels, h, w);
    const int hot = qp.index();
    for (int i = 0; i < n; ++i) {
        double* base = &t.v[t.idx(i, hot, 0, 0)];
        std::fill(base, base + static_cast<std::size_t>(h) * w, 1.0);
    }
    return t;
}

Tensor4 filter_forward_traced(const Tensor4& rec, QpLevel qp, const FilterParams& f,
                              const FilterArch& arch, FilterTrace& trace) {
    check_filter(f, arch, "filter_forward");
    if (rec.c != arch.in_channels)
        throw ShapeError("filter_forward: input " + rec.shape_str() + " must have " +
                         std::to_string(arch.in_channels) + " channels");
    const int div = arch.spatial_divisor();
    if (rec.h % div || rec.w % div)
        throw ShapeError("filter_forward: dims " + rec.shape_str() +
                         " not divisible by 2^depth = " + std::to_string(div) +
                         " (pad before calling)");

    trace = FilterTrace{};
    trace.input = rec;
    trace.cat_in = concat_channels(rec, qp_planes(qp, rec.n, rec.h, rec.w, arch.qp_channels));
    trace.head_pre = conv_forward(trace.cat_in, f.layers[0]);
    trace.head_act = leaky_relu_forward(trace.head_pre, kLeakySlope);

    Tensor4 cur = trace.head_act;
    for (int d = 0; d < arch.depth; ++d) {
        trace.enc_pre.push_back(conv_forward(cur, f.layers[1 + d]));
        trace.enc_act.push_back(leaky_relu_forward(trace.enc_pre.back(), kLeakySlope));
        cur = trace.enc_act.back();
    }
    const int rb = res_base(arch);
    for (int r = 0; r < arch.res_blocks; ++r) {
        trace.res_in.push_back(cur);
        trace.res_mid_pre.push_back(conv_forward(cur, f.layers[rb + 2 * r]));
        trace.res_mid_act.push_back(leaky_relu_forward(trace.res_mid_pre.back(), kLeakySlope));
        trace.res_out_pre.push_back(
            conv_forward(trace.res_mid_act.back(), f.layers[rb + 2 * r + 1]));
        cur = add(trace.res_out_pre.back(), trace.res_in.back());
    }
    trace.bottleneck_out = cur;
    const int db = dec_base(arch);
    for (int e = 0; e < arch.depth; ++e) {
        const int level = arch.depth - 1 - e;
        trace.up_pre.push_back(conv_forward(cur, f.layers[db + 2 * e]));
        trace.up_act.push_back(leaky_relu_forward(trace.up_pre.back(), kLeakySlope));
        const Tensor4& lateral = level == 0 ? trace.head_act : trace.enc_act[level - 1];
        trace.fused_cat.push_back(concat_channels(trace.up_act.back(), lateral));
        trace.fuse_pre.push_back(conv_forward(trace.fused_cat.back(), f.layers[db + 2 * e + 1]));
        trace.fuse_act.push_back(leaky_relu_forward(trace.fuse_pre.back(), kLeakySlope));
        cur = trace.fuse_act.back();
    }
    trace.out_pre = conv_forward(cur, f.layers[out_index(arch)]);
    return add(trace.out_pre, trace.input);
}

ImagePlane filter_forward(const ImagePlane& rec, QpLevel qp, const FilterParams& f,
                          const FilterArch& arch) {
    FilterTrace trace;
    const Tensor4 out = filter_forward_traced(tensor_from_plane(rec), qp, f, arch, trace);
    return plane_from_tensor(out);
}

void filter_backward(const FilterTrace& trace, const Tensor4& upstream, const FilterParams& f,
                     const FilterArch& arch, FilterGrads& grads, Tensor4* input_grad) {
    check_filter(f, arch, "filter_backward");
    if (grads.size() != f.layers.size())
        throw ShapeError("filter_backward: gradient buffers do not match layer count");
    require_same_shape(upstream, trace.input, "filter_backward");

    const int rb = res_base(arch);
    const int db = dec_base(arch);
    const int oi = out_index(arch);

    const Tensor4& out_in = arch.depth > 0 ? trace.fuse_act.back() : trace.bottleneck_out;
    Tensor4 d_stage = conv_backward(out_in, f.layers[oi], upstream, grads[oi]);

    // gradient sinks for the lateral connections, indexed by decoder level
    std::vector<Tensor4> d_lat(static_cast<std::size_t>(arch.depth));
    for (int e = arch.depth - 1; e >= 0; --e) {
        const int level = arch.depth - 1 - e;
        const Tensor4 d_fuse_pre = leaky_relu_backward(trace.fuse_pre[e], d_stage, kLeakySlope);
        const Tensor4 d_cat =
            conv_backward(trace.fused_cat[e], f.layers[db + 2 * e + 1], d_fuse_pre,
                          grads[db + 2 * e + 1]);
        Tensor4 d_up_act, d_lateral;
        split_channels(d_cat, arch.base_channels << level, d_up_act, d_lateral);
        if (d_lat[level].count())
            add_inplace(d_lat[level], d_lateral);
        else
            d_lat[level] = std::move(d_lateral);
        const Tensor4 d_up_pre = leaky_relu_backward(trace.up_pre[e], d_up_act, kLeakySlope);
        const Tensor4& up_in = e == 0 ? trace.bottleneck_out : trace.fuse_act[e - 1];
        d_stage = conv_backward(up_in, f.layers[db + 2 * e], d_up_pre, grads[db + 2 * e]);
    }

    for (int r = arch.res_blocks - 1; r >= 0; --r) {
        const Tensor4 d_mid_act =
            conv_backward(trace.res_mid_act[r], f.layers[rb + 2 * r + 1], d_stage,
                          grads[rb + 2 * r + 1]);
        const Tensor4 d_mid_pre =
            leaky_relu_backward(trace.res_mid_pre[r], d_mid_act, kLeakySlope);
        Tensor4 d_in =
            conv_backward(trace.res_in[r], f.layers[rb + 2 * r], d_mid_pre, grads[rb + 2 * r]);
        add_inplace(d_in, d_stage);  // skip path
        d_stage = std::move(d_in);
    }

    for (int d = arch.depth - 1; d >= 0; --d) {
        if (d + 1 < arch.depth && d_lat[d + 1].count()) add_inplace(d_stage, d_lat[d + 1]);
        const Tensor4 d_enc_pre = leaky_relu_backward(trace.enc_pre[d], d_stage, kLeakySlope);
        const Tensor4& enc_in = d == 0 ? trace.head_act : trace.enc_act[d - 1];
        d_stage = conv_backward(enc_in, f.layers[1 + d], d_enc_pre, grads[1 + d]);
    }

    if (arch.depth > 0 && d_lat[0].count()) add_inplace(d_stage, d_lat[0]);
    const Tensor4 d_head_pre = leaky_relu_backward(trace.head_pre, d_stage, kLeakySlope);
    const Tensor4 d_cat_in = conv_backward(trace.cat_in, f.layers[0], d_head_pre, grads[0]);

    if (input_grad) {
        Tensor4 d_rec, d_qp;
        split_channels(d_cat_in, arch.in_channels, d_rec, d_qp);
        add_inplace(d_rec, upstream);  // global skip
        *input_grad = std::move(d_rec);
    }
}

ImagePlane filter_apply_padded(const ImagePlane& rec, QpLevel qp, const FilterParams& f,
                               const FilterArch& arch) {
    const int div = arch.spatial_divisor();
    const int ph = (rec.h + div - 1) / div * div;
    const int pw = (rec.w + div - 1) / div * div;
    if (ph == rec.h && pw == rec.w) return filter_forward(rec, qp, f, arch);
    return crop(filter_forward(replicate_pad(rec, ph, pw), qp, f, arch), rec.h, rec.w);
}

FilterBank init_bank(const FilterArch& arch, int filters, std::uint64_t base_seed,
                     bool distinct_seeds) {
    if (filters < 1) throw ConfigError("init_bank: need at least one filter");
    FilterBank bank;
    bank.arch = arch;
    bank.filters.reserve(static_cast<std::size_t>(filters));
    for (int j = 0; j < filters; ++j) {
        const int id = j + 1;
        bank.filters.push_back(
            init_filter(arch, id, distinct_seeds ? base_seed + static_cast<std::uint64_t>(id)
                                                 : base_seed));
    }
    return bank;
}

namespace {
constexpr std::uint32_t kBankFormatVersion = 1;
}

void save_bank(ByteWriter& w, const FilterBank& bank) {
    w.tag("FBNK");
    w.u32(kBankFormatVersion);
    w.u32(static_cast<std::uint32_t>(bank.filters.size()));
    w.u32(static_cast<std::uint32_t>(bank.arch.base_channels));
    w.u32(static_cast<std::uint32_t>(bank.arch.depth));
    w.u32(static_cast<std::uint32_t>(bank.arch.res_blocks));
    w.u32(static_cast<std::uint32_t>(bank.arch.qp_channels));
    w.u32(static_cast<std::uint32_t>(bank.arch.in_channels));
    for (const FilterParams& f : bank.filters) save_layers(w, f.layers);
}

FilterBank load_bank(ByteReader& r) {
    r.expect_tag("FBNK", "bank file");
    const std::size_t ver_at = r.offset();
    const std::uint32_t version = r.u32();
    if (version != kBankFormatVersion)
        throw ParseError("bank file: unsupported version " + std::to_string(version) +
                         " at offset " + std::to_string(ver_at));
    const std::uint32_t count = r.u32();
    FilterBank bank;
    bank.arch.base_channels = static_cast<int>(r.u32());
    bank.arch.depth = static_cast<int>(r.u32());
    bank.arch.res_blocks = static_cast<int>(r.u32());
    bank.arch.qp_channels = static_cast<int>(r.u32());
    bank.arch.in_channels = static_cast<int>(r.u32());
    bank.arch.validate();
    const std::vector<LayerParams> expected = make_filter_layers(bank.arch);
    for (std::uint32_t j = 0; j < count; ++j) {
        const std::size_t at = r.offset();
        FilterParams f;
        f.layers = load_layers(r);
        f.id = static_cast<int>(j) + 1;
        if (f.layers.size() != expected.size())
            throw ParseError("bank file: filter " + std::to_string(j) + " at offset " +
                             std::to_string(at) + " has wrong layer count");
        for (std::size_t li = 0; li < expected.size(); ++li) {
            const LayerParams& a = f.layers[li];
            const LayerParams& b = expected[li];
            if (a.out_ch != b.out_ch || a.in_ch != b.in_ch || a.k != b.k ||
                a.stride != b.stride || a.mode != b.mode)
                throw ParseError("bank file: filter " + std::to_string(j) + " layer " +
                                 std::to_string(li) + " shape " + a.shape_str() +
                                 " does not match architecture (" + b.shape_str() + ")");
        }
        bank.filters.push_back(std::move(f));
    }
    return bank;
}

void save_bank_file(const std::string& path, const FilterBank& bank) {
    ByteWriter w;
    save_bank(w, bank);
    write_file(path, w.data());
}

FilterBank load_bank_file(const std::string& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    ByteReader r(bytes);
    return load_bank(r);
}

}  // namespace ppf
