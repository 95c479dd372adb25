#ifndef SSINV_FLUCTUATION_HPP
#define SSINV_FLUCTUATION_HPP

#include "ssinv/cost_model.hpp"
#include "ssinv/scale_kernel.hpp"

namespace ssinv {

/// E_x[int_0^{tau_s^-} e^{-q t} h(X_t) dt] = W(x - s) Psi(s; h) - phi_s(x; h).
/// The e^{Phi (x - s)} parts cancel exactly into c0 Psi(x; h), which is what is evaluated.
inline double resolvent_cost(const scale_kernel& k, double x, double s, const integrand& h) {
    if (x <= s) return 0.0;
    const double y = x - s;
    const double decay = detail::sum_terms(k, [y](double r, double b) { return b * std::exp(-r * y); });
    return k.c0 * psi_transform(h, k.phi_q, x) - decay * psi_transform(h, k.phi_q, s) +
           decaying_convolution(k, h, s, x);
}

/// E_x[int_0^inf e^{-q t} h(U_t^s) dt] for the process reflected at s:
/// Z(x - s) (Phi/q) Psi(s; h) - phi_s(x; h), again with the growing parts cancelled.
inline double reflected_running_cost(const scale_kernel& k, double x, double s, const integrand& h) {
    const double y = x - s;
    const double psi_s = psi_transform(h, k.phi_q, s);
    if (y <= 0.0) return k.phi_q / k.q * psi_s;
    return (k.phi_q / k.q - k.c0 - k.phi_q * detail::decaying_wbar(k, y)) * psi_s +
           k.c0 * psi_transform(h, k.phi_q, x) + decaying_convolution(k, h, s, x);
}

}  // namespace ssinv

#endif  // SSINV_FLUCTUATION_HPP
