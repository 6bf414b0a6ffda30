#pragma once

#include <string>
#include <vector>

#include "dts/model.hpp"

namespace dts {

// Versioned text format; floats printed with 17 significant digits so that
// save -> load -> save is byte-identical. Only isotropic covariances are
// representable (one sigma2 per layer plus top_sigma2).
void save_prior(const std::string& path, const DiffusionPrior& prior);
DiffusionPrior load_prior(const std::string& path);

// Parameter-sample CSV: header "dim0,...,dim{d-1}", one row per sample.
void save_samples_csv(const std::string& path, const Mat& samples);
Mat load_samples_csv(const std::string& path);

// Loss curve CSV: header "epoch,loss".
void save_loss_csv(const std::string& path, const std::vector<Real>& losses);

// 17-significant-digit float formatting shared by all writers.
std::string format_real(Real v);

}  // namespace dts
