#include "cmdis/morphology.hpp"

#include <algorithm>

namespace cmdis {

BinaryMask erode_square(const BinaryMask& mask, int side) {
  require(side >= 1, "erode_square: side must be >= 1");
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      bool all = true;
      for (int j = 0; all && j < side; ++j)
        for (int i = 0; i < side; ++i) {
          int xx = x + i, yy = y + j;
          if (!mask.in_bounds(xx, yy) || !mask.at(xx, yy)) {
            all = false;
            break;
          }
        }
      out.set(x, y, all);
    }
  return out;
}

BinaryMask dilate_square(const BinaryMask& mask, int side) {
  require(side >= 1, "dilate_square: side must be >= 1");
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      bool any = false;
      for (int j = 0; !any && j < side; ++j)
        for (int i = 0; i < side; ++i) {
          int xx = x - i, yy = y - j;
          if (mask.in_bounds(xx, yy) && mask.at(xx, yy)) {
            any = true;
            break;
          }
        }
      out.set(x, y, any);
    }
  return out;
}

BinaryMask open_square(const BinaryMask& mask, int side) {
  return dilate_square(erode_square(mask, side), side);
}

namespace {

bool any_neighbor_set(const BinaryMask& m, int x, int y) {
  for (int j = -1; j <= 1; ++j)
    for (int i = -1; i <= 1; ++i) {
      int xx = x + i, yy = y + j;
      if (m.in_bounds(xx, yy) && m.at(xx, yy)) return true;
    }
  return false;
}

bool all_neighbors_set(const BinaryMask& m, int x, int y) {
  for (int j = -1; j <= 1; ++j)
    for (int i = -1; i <= 1; ++i) {
      int xx = x + i, yy = y + j;
      if (!m.in_bounds(xx, yy) || !m.at(xx, yy)) return false;
    }
  return true;
}

BinaryMask morph3x3(const BinaryMask& mask, int iterations, bool dilate) {
  require(iterations >= 0, "morph3x3: iterations must be >= 0");
  BinaryMask cur = mask;
  for (int it = 0; it < iterations; ++it) {
    BinaryMask next(cur.width(), cur.height());
    for (int y = 0; y < cur.height(); ++y)
      for (int x = 0; x < cur.width(); ++x)
        next.set(x, y, dilate ? any_neighbor_set(cur, x, y) : all_neighbors_set(cur, x, y));
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

BinaryMask dilate3x3(const BinaryMask& mask, int iterations) {
  return morph3x3(mask, iterations, true);
}

BinaryMask erode3x3(const BinaryMask& mask, int iterations) {
  return morph3x3(mask, iterations, false);
}

std::vector<PixelSet> connected_components(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<PixelSet> components;
  std::vector<PixelCoord> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!mask.at(x, y) || seen[idx]) continue;
      PixelSet comp;
      stack.clear();
      stack.push_back({x, y});
      seen[idx] = 1;
      while (!stack.empty()) {
        PixelCoord p = stack.back();
        stack.pop_back();
        comp.push_back(p);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            int nx = p.x + dx, ny = p.y + dy;
            if (!mask.in_bounds(nx, ny) || !mask.at(nx, ny)) continue;
            std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (seen[nidx]) continue;
            seen[nidx] = 1;
            stack.push_back({nx, ny});
          }
      }
      std::sort(comp.begin(), comp.end(), scan_less);
      components.push_back(std::move(comp));
    }
  std::stable_sort(components.begin(), components.end(),
                   [](const PixelSet& a, const PixelSet& b) {
                     if (a.size() != b.size()) return a.size() > b.size();
                     return scan_less(a.front(), b.front());
                   });
  return components;
}

}  // namespace cmdis
