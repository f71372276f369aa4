//! Closed forms for the non-interacting walk (φ ≡ 0).
//!
//! For the free walk everything is explicit: the cumulant generating
//! function of a step is Λ(F) = ln(2 Σ_i cosh F_i), the killed-walk
//! two-point function in d=1 follows the first-passage generating function,
//! and the conjugate map is μ(F) = Λ(F) exactly, with drift ∇Λ and
//! covariance d²Λ. These are the algebraic reference points the estimated
//! quantities are tested against.

/// Λ(F) = ln Σ_{unit steps e} e^{⟨F,e⟩} = ln(2 Σ_i cosh F_i).
pub fn step_log_mgf(force: &[f64]) -> f64 {
    (2.0 * force.iter().map(|f| f.cosh()).sum::<f64>()).ln()
}

/// ln Z_n^F for φ ≡ 0: steps factorize, so Z_n^F = e^{n Λ(F)}.
pub fn free_log_z(n: usize, force: &[f64]) -> f64 {
    n as f64 * step_log_mgf(force)
}

/// First-passage generating function of the 1d simple walk:
/// f(s) = (1 − √(1 − 4s²)) / (2s), the weight of all first-passage paths
/// to +1 with per-step weight s. Defined for 0 < s ≤ 1/2.
pub fn first_passage_root(s: f64) -> f64 {
    (1.0 - (1.0 - 4.0 * s * s).sqrt()) / (2.0 * s)
}

/// Exact ξ_λ(e₁) for the 1d killed free walk: −ln f(e^{−λ}), λ > ln 2.
pub fn xi_1d(lambda: f64) -> f64 {
    -first_passage_root((-lambda).exp()).ln()
}

/// Exact inverse correlation length of the free walk in any dimension:
/// ξ_λ(x) = max{⟨F, x⟩ : Λ(F) ≤ λ}. The maximizer has F_i = asinh(t x_i)
/// with a scalar t solving the constraint; monotone, so bisection is safe.
pub fn xi_free(lambda: f64, x: &[f64], d: usize) -> f64 {
    debug_assert_eq!(x.len(), d);
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let log2d = ((2 * d) as f64).ln();
    assert!(
        lambda > log2d,
        "free-walk ξ needs λ > ln 2d = {log2d}, got {lambda}"
    );
    let constraint = |t: f64| -> f64 {
        (2.0 * x
            .iter()
            .map(|&xi| (1.0 + t * t * xi * xi).sqrt())
            .sum::<f64>())
        .ln()
    };
    // bracket t so that Λ crosses λ
    let mut hi = 1.0;
    while constraint(hi) < lambda {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if constraint(mid) < lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    x.iter().map(|&xi| (t * xi).asinh() * xi).sum()
}

/// The conjugate parameter of the free walk: μ(F) = Λ(F).
pub fn mu_free(force: &[f64]) -> f64 {
    step_log_mgf(force)
}

/// Drift of the tilted free step: v̄_F = ∇Λ(F), componentwise
/// sinh F_i / Σ_j cosh F_j.
pub fn drift_free(force: &[f64]) -> Vec<f64> {
    let c: f64 = force.iter().map(|f| f.cosh()).sum();
    force.iter().map(|f| f.sinh() / c).collect()
}

/// Per-step covariance of the tilted free walk: Σ_F = d²Λ(F),
/// diag(cosh F_i)/C − (sinh F)(sinh F)ᵀ/C², C = Σ cosh F_j.
pub fn sigma_free(force: &[f64]) -> Vec<Vec<f64>> {
    let d = force.len();
    let c: f64 = force.iter().map(|f| f.cosh()).sum();
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let mut v = -force[i].sinh() * force[j].sinh() / (c * c);
            if i == j {
                v += force[i].cosh() / c;
            }
            m[i][j] = v;
        }
    }
    m
}

/// Exact law of one tilted step: P(e) ∝ e^{⟨F,e⟩} over the 2d unit steps,
/// as (axis, sign, probability) triples in canonical order.
pub fn tilted_step_law(force: &[f64]) -> Vec<(usize, i64, f64)> {
    let d = force.len();
    let norm: f64 = 2.0 * force.iter().map(|f| f.cosh()).sum::<f64>();
    let mut out = Vec::with_capacity(2 * d);
    for (axis, f) in force.iter().enumerate() {
        out.push((axis, 1, f.exp() / norm));
        out.push((axis, -1, (-f).exp() / norm));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duality_of_xi_and_mgf_in_1d() {
        // 2 cosh ξ_λ(1) = e^λ: the 1d first-passage rate inverts Λ.
        for lambda in [0.75, 1.0, 1.7, 3.0] {
            let xi = xi_1d(lambda);
            assert!((2.0 * xi.cosh() - lambda.exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn xi_free_matches_1d_closed_form() {
        for lambda in [0.8, 1.2, 2.0] {
            let a = xi_free(lambda, &[1.0], 1);
            let b = xi_1d(lambda);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn xi_free_is_homogeneous_and_symmetric() {
        let lambda = 1.8;
        let x = [0.6, -1.1];
        let a = xi_free(lambda, &x, 2);
        let b = xi_free(lambda, &[1.2, -2.2], 2);
        assert!((2.0 * a - b).abs() < 1e-8);
        let m = xi_free(lambda, &[-0.6, 1.1], 2);
        assert!((a - m).abs() < 1e-10);
    }

    #[test]
    fn drift_is_gradient_of_mu() {
        let f = [0.5, -0.3];
        let h = 1e-6;
        let v = drift_free(&f);
        for i in 0..2 {
            let mut fp = f.to_vec();
            let mut fm = f.to_vec();
            fp[i] += h;
            fm[i] -= h;
            let fd = (mu_free(&fp) - mu_free(&fm)) / (2.0 * h);
            assert!((fd - v[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn sigma_is_hessian_of_mu() {
        let f = [0.4, 0.1];
        let h = 1e-4;
        let s = sigma_free(&f);
        for i in 0..2 {
            for j in 0..2 {
                let mut fpp = f.to_vec();
                let mut fpm = f.to_vec();
                let mut fmp = f.to_vec();
                let mut fmm = f.to_vec();
                fpp[i] += h;
                fpp[j] += h;
                fpm[i] += h;
                fpm[j] -= h;
                fmp[i] -= h;
                fmp[j] += h;
                fmm[i] -= h;
                fmm[j] -= h;
                let fd = (mu_free(&fpp) - mu_free(&fpm) - mu_free(&fmp) + mu_free(&fmm))
                    / (4.0 * h * h);
                assert!((fd - s[i][j]).abs() < 1e-6, "({i},{j}): {fd} vs {}", s[i][j]);
            }
        }
    }

    #[test]
    fn tilted_step_law_normalizes_and_means() {
        let f = [0.7, 0.0];
        let law = tilted_step_law(&f);
        let total: f64 = law.iter().map(|(_, _, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let mean_x: f64 = law
            .iter()
            .map(|&(axis, sign, p)| if axis == 0 { sign as f64 * p } else { 0.0 })
            .sum();
        let v = drift_free(&f);
        assert!((mean_x - v[0]).abs() < 1e-14);
    }
}
