#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaforge/data.hpp"
#include "semaforge/forensics/heatmap.hpp"
#include "semaforge/forensics/transforms.hpp"
#include "semaforge/manipulation.hpp"

namespace semaforge::forensics {

struct EvalSet {
  std::vector<Image> patches;
  std::vector<int> labels;  // 1 generated, 0 pristine
};

EvalSet eval_set_from_dataset(const PatchDataset& data, Split split);

/// Positives: non-overlapping windows of each blended forgery whose area is
/// at least half inside the manipulation mask. Negatives: windows of the
/// forgery's pristine image that miss the mask, plus every window of the
/// extra pristine images.
EvalSet eval_set_from_forgeries(std::span<const manip::ForgeryRecord> forgeries,
                                std::span<const Image> pristine, int patch);

struct TransformGrid {
  TransformKind kind = TransformKind::gaussian_blur;
  std::vector<double> parameters;  // ascending
};

/// Grids over every transform kind, each starting at its identity parameter.
std::vector<TransformGrid> default_sweep_grids();

struct RobustnessCurve {
  TransformKind kind = TransformKind::gaussian_blur;
  std::string detector;  // label, e.g. the training mode
  std::vector<double> parameters;
  std::vector<double> auc;
  std::vector<double> accuracy;

  double mean_auc() const;
  double auc_at(double parameter) const;
};

/// Post-processes the evaluation patches at every grid point and recomputes
/// AUC and accuracy. Identity parameters reuse the clean patches, so those
/// points equal the clean metrics exactly. Noise draws are seeded per
/// grid point.
std::vector<RobustnessCurve> robustness_sweep(const PatchScorer& scorer, const EvalSet& eval,
                                              const std::vector<TransformGrid>& grids, const std::string& label,
                                              std::uint64_t seed = 0);

/// detector,transform,parameter,auc,accuracy
std::string curves_to_csv(std::span<const RobustnessCurve> curves);
nlohmann::json curves_to_json(std::span<const RobustnessCurve> curves);

/// AUC-versus-parameter line plot of all curves of one transform kind.
Image plot_curves(std::span<const RobustnessCurve> curves, TransformKind kind, int width = 360, int height = 240);

}  // namespace semaforge::forensics
