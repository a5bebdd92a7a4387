//! Gamma-Poisson mixture pmf by numerical integration.

pub fn ln_factorial(d: u64) -> f64 {
    (2..=d).map(|k| (k as f64).ln()).sum()
}

/// `ln int_0^inf x^(s-1) exp(-r x) dx` by double-exponential quadrature.
///
/// The integrand is scaled by its value at the mode and split there; the
/// left piece is taken in `w = x^s` when `s < 1`, which removes the endpoint
/// singularity.
fn log_gamma_kernel(s: f64, r: f64) -> f64 {
    let peak = ((s - 1.0) / r).max(1.0 / r);
    let upper = peak + (60.0 * s.sqrt() + 60.0) / r;
    let g = |x: f64| (s - 1.0) * x.ln() - r * x;
    let g0 = g(peak);
    let left = if s < 1.0 {
        quadrature::integrate(
            |w: f64| (-r * w.powf(1.0 / s) - g0).exp() / s,
            0.0,
            peak.powf(s),
            1e-15,
        )
        .integral
    } else {
        quadrature::integrate(|x: f64| (g(x) - g0).exp(), 0.0, peak, 1e-15).integral
    };
    let right = quadrature::integrate(|x: f64| (g(x) - g0).exp(), peak, upper, 1e-15).integral;
    g0 + (left + right).ln()
}

/// `ln Gamma(s)` from Euler's integral.
pub fn ln_gamma_quadrature(s: f64) -> f64 {
    log_gamma_kernel(s, 1.0)
}

/// `ln P(D = d)` from the gamma-Poisson mixture integral
/// `int Poisson(d | l) Gamma(l | shape a, rate tau) dl`; the `l` factors of
/// both densities are collected into one kernel.
pub fn mixture_logpmf(d: u64, a: f64, tau: f64) -> f64 {
    let kernel = log_gamma_kernel(d as f64 + a, 1.0 + tau);
    a * tau.ln() - ln_gamma_quadrature(a) - ln_factorial(d) + kernel
}
