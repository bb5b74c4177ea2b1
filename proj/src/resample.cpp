#include "advpatch/resample.hpp"

#include <algorithm>
#include <cmath>

#include "advpatch/errors.hpp"

namespace advpatch {

ResampleAxis::ResampleAxis(int in_size, int out_size)
    : in_size_(in_size), out_size_(out_size), taps_(out_size) {
  if (in_size < 1 || out_size < 1) throw InvalidArgument("ResampleAxis: sizes must be >= 1");
  const double scale = static_cast<double>(in_size) / out_size;
  const double support = std::max(1.0, scale);
  for (int i = 0; i < out_size; ++i) {
    const double center = (i + 0.5) * scale;
    const int lo = std::max(0, static_cast<int>(std::floor(center - support)));
    const int hi = std::min(in_size - 1, static_cast<int>(std::ceil(center + support)));
    double total = 0.0;
    auto& row = taps_[i];
    for (int j = lo; j <= hi; ++j) {
      const double w = 1.0 - std::abs((j + 0.5 - center) / support);
      if (w > 0.0) {
        row.push_back({j, w});
        total += w;
      }
    }
    if (row.empty()) {
      // Only reachable when center sits exactly between samples at an edge.
      row.push_back({std::clamp(static_cast<int>(center), 0, in_size - 1), 1.0});
      total = 1.0;
    }
    for (auto& t : row) t.weight /= total;
  }
}

Grid resize(const Grid& src, int out_h, int out_w) {
  if (src.height() == out_h && src.width() == out_w) return src;
  const int c = src.channels();
  const ResampleAxis ax(src.width(), out_w);
  const ResampleAxis ay(src.height(), out_h);
  Grid tmp(src.height(), out_w, c);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (const auto& t : ax.taps(x)) {
        for (int k = 0; k < c; ++k) tmp.at(y, x, k) += t.weight * src.at(y, t.src, k);
      }
    }
  }
  Grid out(out_h, out_w, c);
  for (int y = 0; y < out_h; ++y) {
    for (const auto& t : ay.taps(y)) {
      for (int x = 0; x < out_w; ++x) {
        for (int k = 0; k < c; ++k) out.at(y, x, k) += t.weight * tmp.at(t.src, x, k);
      }
    }
  }
  return out;
}

Grid resize_backward(const Grid& grad_out, int in_h, int in_w) {
  if (grad_out.height() == in_h && grad_out.width() == in_w) return grad_out;
  const int c = grad_out.channels();
  const int out_h = grad_out.height();
  const int out_w = grad_out.width();
  const ResampleAxis ax(in_w, out_w);
  const ResampleAxis ay(in_h, out_h);
  Grid tmp(in_h, out_w, c);
  for (int y = 0; y < out_h; ++y) {
    for (const auto& t : ay.taps(y)) {
      for (int x = 0; x < out_w; ++x) {
        for (int k = 0; k < c; ++k) tmp.at(t.src, x, k) += t.weight * grad_out.at(y, x, k);
      }
    }
  }
  Grid out(in_h, in_w, c);
  for (int y = 0; y < in_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (const auto& t : ax.taps(x)) {
        for (int k = 0; k < c; ++k) out.at(y, t.src, k) += t.weight * tmp.at(y, x, k);
      }
    }
  }
  return out;
}

}  // namespace advpatch
