// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include "nndecomp/model.hpp"
#include "nndecomp/recover.hpp"

namespace nnd {

bool ConvDims::consistent() const {
  if (K <= 0 || I_C <= 0 || O_C <= 0 || S <= 0 || P < 0 || IH <= 0 || OH <= 0) return false;
  auto oh = window_out(IH, K, S, P);
  return oh && *oh == OH;
}

std::string LayoutDesc::str() const {
  switch (kind) {
    case Kind::Plain: return "plain";
    case Kind::Glow5d: return "glow5d(A=" + std::to_string(A) + ")";
    case Kind::Tvm6d: return "tvm6d(A=" + std::to_string(A) + ",B=" + std::to_string(B) + ")";
  }
  return "?";
}

Shape LayoutDesc::stored_shape(std::int64_t O_C, std::int64_t I_C, std::int64_t K) const {
  switch (kind) {
    case Kind::Plain: return {O_C, I_C, K, K};
    case Kind::Glow5d: return {O_C / A, I_C, K, K, A};
    case Kind::Tvm6d: return {O_C / B, I_C / A, K, K, A, B};
  }
  return {};
}

bool LayoutDesc::fits(std::int64_t O_C, std::int64_t I_C) const {
  switch (kind) {
    case Kind::Plain: return true;
    case Kind::Glow5d: return A > 0 && O_C % A == 0;
    case Kind::Tvm6d: return A > 0 && B > 0 && I_C % A == 0 && O_C % B == 0;
  }
  return false;
}

std::uint64_t LayoutDesc::index(std::int64_t oc, std::int64_t ic, std::int64_t ky, std::int64_t kx, std::int64_t I_C,
                                std::int64_t K) const {
  std::int64_t i = 0;
  switch (kind) {
    case Kind::Plain: i = ((oc * I_C + ic) * K + ky) * K + kx; break;
    case Kind::Glow5d: i = ((((oc / A) * I_C + ic) * K + ky) * K + kx) * A + oc % A; break;
    case Kind::Tvm6d:
      i = ((((oc / B) * (I_C / A) + ic / A) * K + ky) * K + kx) * A * B + (ic % A) * B + oc % B;
      break;
  }
  return static_cast<std::uint64_t>(i);
}

namespace {

/// Element offsets of output channel `oc` in the order an input-channel
/// block, kernel row, in-block channel, kernel column loop touches them.
std::vector<std::uint64_t> expected_offsets(const LayoutDesc& l, const ConvDims& d, std::int64_t oc) {
  const std::int64_t A = l.kind == LayoutDesc::Kind::Tvm6d ? l.A : 1;
  std::vector<std::uint64_t> out;
  for (std::int64_t icb = 0; icb < d.I_C / A; ++icb)
    for (std::int64_t ky = 0; ky < d.K; ++ky)
      for (std::int64_t ici = 0; ici < A; ++ici)
        for (std::int64_t kx = 0; kx < d.K; ++kx) out.push_back(l.index(oc, icb * A + ici, ky, kx, d.I_C, d.K) * kElemBytes);
  return out;
}

bool matches(const LayoutDesc& l, const ConvDims& d, std::span<const std::uint64_t> first,
             std::span<const std::uint64_t> next) {
  if (!l.fits(d.O_C, d.I_C)) return false;
  auto e0 = expected_offsets(l, d, 0);
  if (!std::equal(e0.begin(), e0.end(), first.begin(), first.end())) return false;
  if (next.empty() || d.O_C < 2) return true;
  auto e1 = expected_offsets(l, d, 1);
  return std::equal(e1.begin(), e1.end(), next.begin(), next.end());
}

}  // namespace

LayoutDesc detect_layout(std::span<const std::uint64_t> offsets, const ConvDims& dims,
                         std::span<const std::uint64_t> next_channel) {
  const std::size_t n = offsets.size();
  if (n == 0) fail(ErrorCode::LayoutUnrecognized, "no weight offsets");
  if (matches(LayoutDesc::plain(), dims, offsets, next_channel)) return LayoutDesc::plain();

  std::vector<LayoutDesc> candidates;
  if (n >= 2 && offsets[1] % kElemBytes == 0) {
    const auto d1 = static_cast<std::int64_t>(offsets[1] / kElemBytes);
    // The second offset spans A*B, the (K+1)-th one B.
    const auto k = static_cast<std::size_t>(dims.K);
    if (dims.K > 1 && n > k && offsets[k] % kElemBytes == 0) {
      const auto b = static_cast<std::int64_t>(offsets[k] / kElemBytes);
      if (b > 0 && d1 % b == 0 && d1 / b >= 2) candidates.push_back(LayoutDesc::tvm6d(d1 / b, b));
    }
    if (d1 >= 2) candidates.push_back(LayoutDesc::glow5d(d1));
  }
  for (const auto& c : candidates)
    if (matches(c, dims, offsets, next_channel)) return c;

  std::string shown;
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 8); ++i) shown += (i ? "," : "") + std::to_string(offsets[i] / kElemBytes);
  fail(ErrorCode::LayoutUnrecognized, "weight offsets [" + shown + (n > 8 ? ",..." : "") +
                                          "] fit no known layout for filter " + shape_str(dims.weight_shape()));
}

Tensor extract_params(const MemorySnapshot& snapshot, const MemRegion& region, const LayoutDesc& layout,
                      const Shape& canonical) {
  const auto count = numel(canonical);
  if (count <= 0) fail(ErrorCode::SizeMismatch, "empty parameter shape " + shape_str(canonical));
  if (region.size != static_cast<std::uint64_t>(count) * kElemBytes)
    fail(ErrorCode::SizeMismatch, "region of " + std::to_string(region.size) + " bytes at " + hex(region.base) +
                                      " does not hold " + shape_str(canonical) + " (" +
                                      std::to_string(count * static_cast<std::int64_t>(kElemBytes)) + " bytes)");
  if (!snapshot.contains(region.base, region.size))
    fail(ErrorCode::RegionOutOfSnapshot, "parameter region " + hex(region.base) + "+" + std::to_string(region.size) +
                                             " is not in the snapshot");
  const std::vector<float> stored = snapshot.read_f32(region.base, static_cast<std::uint64_t>(count));
  if (layout.kind == LayoutDesc::Kind::Plain) return Tensor(canonical, stored);
  if (canonical.size() != 4) fail(ErrorCode::SizeMismatch, "layout " + layout.str() + " needs a 4-D filter");
  const auto OC = canonical[0], IC = canonical[1], K = canonical[2];
  if (!layout.fits(OC, IC)) fail(ErrorCode::SizeMismatch, layout.str() + " does not divide " + shape_str(canonical));
  std::vector<float> plain(static_cast<std::size_t>(count));
  std::size_t i = 0;
  for (std::int64_t oc = 0; oc < OC; ++oc)
    for (std::int64_t ic = 0; ic < IC; ++ic)
      for (std::int64_t ky = 0; ky < K; ++ky)
        for (std::int64_t kx = 0; kx < K; ++kx) plain[i++] = stored[layout.index(oc, ic, ky, kx, IC, K)];
  return Tensor(canonical, std::move(plain));
}

}  // namespace nnd
