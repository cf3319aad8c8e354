#include "ppf/adam.hpp"

#include <cmath>

#include "ppf/errors.hpp"

namespace ppf {

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& st,
               const std::string& where) {
    if (grads.size() != params.size())
        throw ShapeError("adam_step(" + where + "): " + std::to_string(grads.size()) +
                         " gradients for " + std::to_string(params.size()) + " parameters");
    if (st.m.empty() && st.v.empty()) {
        st.m.assign(params.size(), 0.0);
        st.v.assign(params.size(), 0.0);
    }
    if (st.m.size() != params.size() || st.v.size() != params.size())
        throw ShapeError("adam_step(" + where + "): moment buffers do not match parameters");

    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw NumericError("adam_step(" + where + "): non-finite gradient at index " +
                               std::to_string(i));

    st.step += 1;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * g;
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * g * g;
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

}  // namespace ppf
