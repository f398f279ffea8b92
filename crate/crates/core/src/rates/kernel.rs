use crate::constants::K_B;

/// Thermally smeared energy window `x / (1 - exp(-x / k_B T))` in meV.
///
/// `x` is the energy released into the electron bath (meV). The value is
/// `k_B T` at `x = 0`, tends to `x` for `x >> k_B T` and is exponentially
/// small for `x << -k_B T`.
pub fn rate_kernel(x: f64, temperature_k: f64) -> f64 {
    let kt = K_B * temperature_k;
    if x == 0.0 {
        return kt;
    }
    let denom = -(-x / kt).exp_m1();
    if denom.is_infinite() {
        return 0.0;
    }
    (x / denom).max(0.0)
}
