#pragma once

#include <string>
#include <vector>

namespace ppf {

// Bias-corrected Adam over one flat parameter array. Moments are sized on
// the first step.
struct AdamState {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<double> m, v;
};

// One update. `where` names the parameter array in diagnostics.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& st,
               const std::string& where);

}  // namespace ppf
