//! Projected proportional allocation.

/// Allocation `min{d, s·d/(d+mu_next)}` given the conditional expected
/// future demand `mu_next`.
pub fn ppa_decide(d_i: f64, s_i: f64, mu_next: f64) -> f64 {
    if d_i <= 0.0 || s_i <= 0.0 {
        return 0.0;
    }
    if mu_next <= 0.0 {
        return d_i.min(s_i);
    }
    (s_i * d_i / (d_i + mu_next)).min(d_i).min(s_i)
}

/// Variant that also never exceeds the running minimum fill rate `f_i`,
/// so fill rates are non-increasing along the path.
pub fn ppa_monotone_decide(d_i: f64, s_i: f64, mu_next: f64, f_i: f64) -> f64 {
    ppa_decide(d_i, s_i, mu_next).min(f_i * d_i)
}
