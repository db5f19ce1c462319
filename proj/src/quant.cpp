#include "fineq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fineq/parallel.hpp"

namespace fineq {

namespace {

// llround rounds halfway cases away from zero regardless of the FP
// rounding mode, which is exactly the grid rule used everywhere here.
int64_t round_away(double x) { return std::llround(x); }

void validate_params(const ChannelQuantParams& p) {
  if (!(p.s3 >= 0.0f) || !std::isfinite(p.s3))
    throw Error(ErrorKind::InvalidArgument, "scale must be finite and >= 0");
}

struct ChannelView {
  const FloatTensor& t;
  ChannelAxis axis;

  uint32_t count() const {
    return axis == ChannelAxis::Row ? t.rows : t.cols;
  }
  uint32_t length() const {
    return axis == ChannelAxis::Row ? t.cols : t.rows;
  }
  void gather(uint32_t ch, std::vector<float>& out) const {
    const uint32_t len = length();
    out.resize(len);
    if (axis == ChannelAxis::Row) {
      const float* row = t.data.data() + size_t(ch) * t.cols;
      std::copy(row, row + len, out.begin());
    } else {
      for (uint32_t j = 0; j < len; ++j) out[j] = t.at(j, ch);
    }
  }
};

void quantize_channel(std::span<const float> w, bool harmonize,
                      float& scale_out, QuantizedCluster* out, uint32_t nc) {
  const ChannelQuantParams p = channel_scale(w);
  scale_out = p.s3;

  std::vector<Cluster> cl(nc);
  std::vector<SchemeCode> schemes(nc);
  for (uint32_t ci = 0; ci < nc; ++ci) {
    for (uint32_t j = 0; j < kClusterSize; ++j) {
      const size_t idx = size_t(ci) * kClusterSize + j;
      cl[ci][j] = idx < w.size() ? w[idx] : 0.0f;
    }
    schemes[ci] = select_scheme(cl[ci]);
  }

  // Pairs (2i, 2i+1) must share a scheme so the index byte can hold one
  // code per pair. A trailing unpaired cluster keeps its own choice.
  for (uint32_t i = 0; i + 1 < nc; i += 2) {
    if (schemes[i] == schemes[i + 1]) continue;
    schemes[i] = schemes[i + 1] =
        harmonize ? harmonize_pair(cl[i], cl[i + 1], p) : schemes[i];
  }

  for (uint32_t ci = 0; ci < nc; ++ci)
    out[ci] = quantize_cluster(cl[ci], schemes[ci], p);
}

QuantizedTensor prepare_output(const FloatTensor& t, ChannelAxis axis) {
  if (t.size() == 0)
    throw Error(ErrorKind::InvalidArgument, "cannot quantize an empty tensor");
  require_finite(t);

  QuantizedTensor q;
  q.rows = t.rows;
  q.cols = t.cols;
  q.channel_axis = axis;
  q.channel_length = axis == ChannelAxis::Row ? t.cols : t.rows;
  q.clusters_per_channel = clusters_for_length(q.channel_length);
  const uint32_t channels = q.num_channels();
  q.scales.resize(channels);
  q.clusters.resize(size_t(channels) * q.clusters_per_channel);
  return q;
}

void validate_quantized(const QuantizedTensor& q) {
  const uint32_t channels = q.num_channels();
  const uint32_t len =
      q.channel_axis == ChannelAxis::Row ? q.cols : q.rows;
  if (q.rows == 0 || q.cols == 0 || q.channel_length != len ||
      q.clusters_per_channel != clusters_for_length(len) ||
      q.scales.size() != channels ||
      q.clusters.size() != size_t(channels) * q.clusters_per_channel)
    throw Error(ErrorKind::InvalidArgument,
                "quantized tensor layout is inconsistent");
}

}  // namespace

ChannelQuantParams channel_scale(std::span<const float> channel) {
  if (channel.empty())
    throw Error(ErrorKind::InvalidArgument, "channel must be non-empty");
  float amax = 0.0f;
  for (float v : channel) amax = std::max(amax, std::fabs(v));
  return {amax / 3.0f};
}

SchemeCode select_scheme(const Cluster& c) {
  const float m0 = std::fabs(c[0]);
  const float m1 = std::fabs(c[1]);
  const float m2 = std::fabs(c[2]);
  const float mx = std::max({m0, m1, m2});
  const float mn = std::min({m0, m1, m2});
  if (!(mx > 4.0f * mn)) return SchemeCode::All2;
  const int k = (m0 <= m1 && m0 <= m2) ? 0 : (m1 <= m2 ? 1 : 2);
  return SchemeCode(1 + k);
}

QuantizedCluster quantize_cluster(const Cluster& c, SchemeCode scheme,
                                  const ChannelQuantParams& p) {
  validate_params(p);
  QuantizedCluster out;
  out.scheme = scheme;
  if (p.s3 == 0.0f) return out;

  if (scheme == SchemeCode::All2) {
    const double s2 = p.s2();
    for (int j = 0; j < 3; ++j) {
      const auto q = std::clamp<int64_t>(round_away(double(c[j]) / s2), -1, 1);
      out.q[j] = int8_t(3 * q);
    }
  } else {
    const int zp = int(scheme) - 1;
    const double s3 = double(p.s3);
    for (int j = 0; j < 3; ++j) {
      if (j == zp) continue;
      out.q[j] =
          int8_t(std::clamp<int64_t>(round_away(double(c[j]) / s3), -3, 3));
    }
  }
  return out;
}

Cluster dequantize_cluster(const QuantizedCluster& qc,
                           const ChannelQuantParams& p) {
  Cluster out;
  for (int j = 0; j < 3; ++j)
    out[j] = float(double(qc.q[j]) * double(p.s3));
  return out;
}

double pair_loss(const Cluster& a, const Cluster& b, SchemeCode scheme,
                 const ChannelQuantParams& p) {
  double loss = 0.0;
  for (const Cluster* c : {&a, &b}) {
    const QuantizedCluster qc = quantize_cluster(*c, scheme, p);
    for (int j = 0; j < 3; ++j) {
      const double d = double((*c)[j]) - double(qc.q[j]) * double(p.s3);
      loss += d * d;
    }
  }
  return loss;
}

SchemeCode harmonize_pair(const Cluster& a, const Cluster& b,
                          const ChannelQuantParams& p) {
  const SchemeCode sa = select_scheme(a);
  const SchemeCode sb = select_scheme(b);
  if (sa == sb) return sa;

  SchemeCode best = SchemeCode::All2;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 4; ++s) {
    const double loss = pair_loss(a, b, SchemeCode(s), p);
    if (loss < best_loss) {  // strict: lowest code wins ties
      best = SchemeCode(s);
      best_loss = loss;
    }
  }
  return best;
}

QuantizedTensor quantize_matrix(const FloatTensor& t, const QuantConfig& cfg) {
  const ChannelAxis axis = cfg.channel_axis.value_or(t.channel_axis);
  QuantizedTensor q = prepare_output(t, axis);
  const ChannelView view{t, axis};
  const int64_t channels = q.num_channels();

#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int64_t ch = 0; ch < channels; ++ch) {
    if (axis == ChannelAxis::Row) {
      std::span<const float> w(t.data.data() + size_t(ch) * t.cols, t.cols);
      quantize_channel(w, cfg.harmonize, q.scales[ch],
                       q.clusters.data() + ch * q.clusters_per_channel,
                       q.clusters_per_channel);
    } else {
      std::vector<float> w;
      view.gather(uint32_t(ch), w);
      quantize_channel(w, cfg.harmonize, q.scales[ch],
                       q.clusters.data() + ch * q.clusters_per_channel,
                       q.clusters_per_channel);
    }
  }
  return q;
}

FloatTensor dequantize_matrix(const QuantizedTensor& q) {
  validate_quantized(q);
  FloatTensor t(q.rows, q.cols, q.channel_axis);
  const int64_t channels = q.num_channels();

#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int64_t ch = 0; ch < channels; ++ch) {
    const double s3 = double(q.scales[ch]);
    const QuantizedCluster* cl =
        q.clusters.data() + ch * q.clusters_per_channel;
    for (uint32_t j = 0; j < q.channel_length; ++j) {
      const float v =
          float(double(cl[j / kClusterSize].q[j % kClusterSize]) * s3);
      if (q.channel_axis == ChannelAxis::Row)
        t.at(uint32_t(ch), j) = v;
      else
        t.at(j, uint32_t(ch)) = v;
    }
  }
  return t;
}

AverageBits average_bits(const QuantizedTensor& q) {
  validate_quantized(q);
  const uint64_t payload_bits = uint64_t(q.num_channels()) *
                                blocks_for_clusters(q.clusters_per_channel) *
                                kBlockBytes * 8;
  const uint64_t weights = uint64_t(q.rows) * q.cols;
  return {double(payload_bits) / double(weights),
          q.channel_length % (kClusterSize * kClustersPerBlock) != 0};
}

std::array<uint64_t, 4> scheme_histogram(const QuantizedTensor& q) {
  std::array<uint64_t, 4> h{};
  for (const QuantizedCluster& c : q.clusters) ++h[size_t(c.scheme)];
  return h;
}

namespace serial {

QuantizedTensor quantize_matrix(const FloatTensor& t, const QuantConfig& cfg) {
  const ChannelAxis axis = cfg.channel_axis.value_or(t.channel_axis);
  QuantizedTensor q = prepare_output(t, axis);
  const ChannelView view{t, axis};
  std::vector<float> w;
  for (uint32_t ch = 0; ch < q.num_channels(); ++ch) {
    view.gather(ch, w);
    quantize_channel(w, cfg.harmonize, q.scales[ch],
                     q.clusters.data() + size_t(ch) * q.clusters_per_channel,
                     q.clusters_per_channel);
  }
  return q;
}

FloatTensor dequantize_matrix(const QuantizedTensor& q) {
  validate_quantized(q);
  FloatTensor t(q.rows, q.cols, q.channel_axis);
  for (uint32_t ch = 0; ch < q.num_channels(); ++ch) {
    const double s3 = double(q.scales[ch]);
    const QuantizedCluster* cl =
        q.clusters.data() + size_t(ch) * q.clusters_per_channel;
    for (uint32_t j = 0; j < q.channel_length; ++j) {
      const float v =
          float(double(cl[j / kClusterSize].q[j % kClusterSize]) * s3);
      if (q.channel_axis == ChannelAxis::Row)
        t.at(ch, j) = v;
      else
        t.at(j, ch) = v;
    }
  }
  return t;
}

}  // namespace serial

}  // namespace fineq
