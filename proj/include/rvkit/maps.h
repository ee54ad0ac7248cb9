#ifndef RVKIT_MAPS_H_
#define RVKIT_MAPS_H_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "rvkit/grid.h"

namespace rvkit {

// Regression elements seen well in the perspective view.
enum PBranch : int { kOmegaY = 0, kOmegaZ = 1, kLogH = 2, kPBranchDepth = 3 };
// Regression elements seen well in the bird's-eye view.
enum QBranch : int {
  kOmegaX = 0,
  kLogL = 1,
  kLogW = 2,
  kCosPhi = 3,
  kSinPhi = 4,
  kQBranchDepth = 5
};

// The eight regression elements in reporting order.
enum class Element : int {
  kOmegaX = 0,
  kOmegaY,
  kOmegaZ,
  kLogL,
  kLogW,
  kLogH,
  kCosPhi,
  kSinPhi,
};
inline constexpr int kElementCount = 8;
inline constexpr std::array<std::string_view, kElementCount> kElementNames = {
    "omega_x", "omega_y", "omega_z", "log_l",
    "log_w",   "log_h",   "cos_phi", "sin_phi"};

struct ElementSlot {
  bool p_branch;
  int channel;
};
inline constexpr std::array<ElementSlot, kElementCount> kElementSlots = {{
    {false, kOmegaX},
    {true, kOmegaY},
    {true, kOmegaZ},
    {false, kLogL},
    {false, kLogW},
    {true, kLogH},
    {false, kCosPhi},
    {false, kSinPhi},
}};

// Per-pixel network outputs. Class k (1-based) lives in semantic_scores
// channel k - 1; scores are independent per class and background is the
// absence of any class above threshold.
struct PredictionMaps {
  Grid<float> semantic_scores;
  Grid<float> centerness;
  Grid<float> p_branch;
  Grid<float> q_branch;

  int rows() const { return centerness.rows(); }
  int cols() const { return centerness.cols(); }
  int num_classes() const { return semantic_scores.depth(); }

  static PredictionMaps Zeros(int rows, int cols, int num_classes);
  // Throws ShapeError unless every plane covers rows x cols.
  void RequireShape(int rows, int cols) const;
};

inline PredictionMaps PredictionMaps::Zeros(int rows, int cols,
                                            int num_classes) {
  PredictionMaps p;
  p.semantic_scores = Grid<float>(rows, cols, num_classes);
  p.centerness = Grid<float>(rows, cols);
  p.p_branch = Grid<float>(rows, cols, kPBranchDepth);
  p.q_branch = Grid<float>(rows, cols, kQBranchDepth);
  return p;
}

inline void PredictionMaps::RequireShape(int rows, int cols) const {
  auto check = [&](const Grid<float>& g, const char* name) {
    if (g.rows() != rows || g.cols() != cols) {
      throw ShapeError(std::string(name) + " is " + std::to_string(g.rows()) +
                       "x" + std::to_string(g.cols()) + ", image is " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    }
  };
  check(semantic_scores, "prediction semantic scores");
  check(centerness, "prediction centerness");
  check(p_branch, "prediction p-branch");
  check(q_branch, "prediction q-branch");
  if (p_branch.depth() != kPBranchDepth || q_branch.depth() != kQBranchDepth) {
    throw ShapeError("prediction regression branches have wrong depth");
  }
}

}  // namespace rvkit

#endif  // RVKIT_MAPS_H_
