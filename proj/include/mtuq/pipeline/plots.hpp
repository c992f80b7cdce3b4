#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mtuq/metrics/metrics.hpp"
#include "mtuq/pipeline/evaluate.hpp"

namespace mtuq::pipeline {

// One panel per image: input | seg prediction | seg uncertainty |
// depth prediction | depth uncertainty. Colormap value ranges are written
// into the PNG as tEXt chunks.
void emit_image_panel(const Image& img, const uq::AggregatedPrediction& pred,
                      const std::string& path);

// Grouped bar chart of the report metrics (probabilities on [0,1]; RMSE
// normalized by the largest value across reports). Bar order and ranges are
// annotated as tEXt chunks.
void emit_metrics_chart(const std::vector<std::pair<std::string, metrics::MetricsReport>>& reports,
                        const std::string& path);

// Renders panels for up to max_images dataset images under out_dir.
// Returns the written file paths.
std::vector<std::string> emit_plots(const Predictor& predict, const Dataset& data,
                                    int max_images, const std::string& out_dir);

} // namespace mtuq::pipeline
