//! The interaction-potential catalog and Gibbs weights.
//!
//! A potential is a non-decreasing φ: N → R̄ with φ(0) = 0; the energy of a
//! path is Φ(γ) = Σ_x φ(ℓ_x(γ)). φ = ∞ is a legitimate value (hard core):
//! weights map it to an exact 0, never to NaN, so the self-avoiding walk is a
//! zero-measure event rather than an exception.
//!
//! Superadditive φ (φ(ℓ₁+ℓ₂) ≥ φ(ℓ₁)+φ(ℓ₂)) repels the chain from itself;
//! subadditive φ attracts it. Attractive potentials may carry a linear part
//! α = lim φ(ℓ)/ℓ; it is *not* subtracted automatically — [`Potential::linear_rate`]
//! reports the estimate so callers can shift explicitly.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::PolyError;
use crate::lattice::{local_times, LatticeVector, Path};

/// Distribution of the i.i.d. site potential V ≥ 0 for annealed/quenched models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum VDist {
    /// V ≡ value.
    PointMass { value: f64 },
    /// V = b with probability p, else 0.
    Bernoulli { p: f64, b: f64 },
    /// V uniform on [0, b].
    Uniform { b: f64 },
}

impl VDist {
    pub fn validate(&self) -> Result<(), PolyError> {
        let ok = match *self {
            VDist::PointMass { value } => value >= 0.0,
            VDist::Bernoulli { p, b } => (0.0..=1.0).contains(&p) && b >= 0.0,
            VDist::Uniform { b } => b >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(PolyError::Domain(
                "potential distribution must have support in [0, ∞)".into(),
            ))
        }
    }

    /// Upper end of the support.
    pub fn bound(&self) -> f64 {
        match *self {
            VDist::PointMass { value } => value,
            VDist::Bernoulli { b, .. } => b,
            VDist::Uniform { b } => b,
        }
    }

    /// E e^{−tV}, exactly for atoms, by adaptive Simpson quadrature for the
    /// continuous case (the integrand is smooth, so this converges fast).
    pub fn laplace(&self, t: f64) -> f64 {
        match *self {
            VDist::PointMass { value } => (-t * value).exp(),
            VDist::Bernoulli { p, b } => (1.0 - p) + p * (-t * b).exp(),
            VDist::Uniform { b } => {
                if b == 0.0 {
                    1.0
                } else {
                    simpson(|v| (-t * v).exp(), 0.0, b, 1e-13) / b
                }
            }
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: impl Fn(f64) -> f64 + Copy,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// φ(ℓ) = −log E e^{−ℓV}: the effective potential of a polymer in an
/// annealed random environment. Always attractive (Hölder), sublinear when
/// P(V = 0) > 0.
pub fn annealed_phi(dist: &VDist, ell: u64) -> Result<f64, PolyError> {
    dist.validate()?;
    if ell == 0 {
        return Ok(0.0);
    }
    Ok(-dist.laplace(ell as f64).ln())
}

/// The interaction-potential catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// φ ≡ 0: the free walk.
    Free,
    /// Hard-core self-avoidance: φ(ℓ ≥ 2) = ∞.
    Saw,
    /// Soft-core pair penalty φ(ℓ) = β ℓ(ℓ−1)/2.
    DombJoyce { beta: f64 },
    /// β per distinct visited site: φ(ℓ) = β 1{ℓ ≥ 1}.
    Sausage { beta: f64 },
    /// k-th visit to a site costs betas[k−1]; beyond the table the last
    /// entry repeats. The sequence must be non-increasing and non-negative.
    Reinforced { betas: Vec<f64> },
    /// φ(ℓ) = −log E e^{−ℓV} for an i.i.d. site potential V.
    Annealed {
        #[serde(flatten)]
        dist: VDist,
    },
    /// Two-color traps: φ(ℓ) = β 1{ℓ ≥ 1} + β 1{ℓ ≥ 2}.
    TwoColor { beta: f64 },
    /// Explicit table of φ(1), φ(2), …; beyond the table the last increment
    /// extends constantly, which keeps classification decidable.
    Custom { table: Vec<f64> },
}

/// Result of the sub/super-additivity scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialClass {
    Repulsive,
    Attractive,
    Neither,
}

impl Potential {
    pub fn free() -> Self {
        Potential::Free
    }

    /// φ(ℓ). Extended-real: may return `f64::INFINITY`.
    pub fn phi(&self, ell: u64) -> f64 {
        if ell == 0 {
            return 0.0;
        }
        match self {
            Potential::Free => 0.0,
            Potential::Saw => {
                if ell >= 2 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Potential::DombJoyce { beta } => 0.5 * beta * (ell as f64) * (ell as f64 - 1.0),
            Potential::Sausage { beta } => *beta,
            Potential::Reinforced { betas } => {
                if betas.is_empty() {
                    return 0.0;
                }
                let n = betas.len() as u64;
                if ell <= n {
                    betas[..ell as usize].iter().sum()
                } else {
                    betas.iter().sum::<f64>() + (ell - n) as f64 * betas[n as usize - 1]
                }
            }
            Potential::Annealed { dist } => annealed_phi(dist, ell).unwrap_or(f64::INFINITY),
            Potential::TwoColor { beta } => {
                if ell >= 2 {
                    2.0 * beta
                } else {
                    *beta
                }
            }
            Potential::Custom { table } => {
                if table.is_empty() {
                    return 0.0;
                }
                let n = table.len() as u64;
                if ell <= n {
                    table[ell as usize - 1]
                } else {
                    // extend the last increment constantly
                    let last = table[n as usize - 1];
                    let incr = if n >= 2 {
                        last - table[n as usize - 2]
                    } else {
                        last
                    };
                    last + (ell - n) as f64 * incr
                }
            }
        }
    }

    /// φ(1), the single-visit cost entering concatenation bounds.
    pub fn phi1(&self) -> f64 {
        self.phi(1)
    }

    /// φ(ℓ+1) − φ(ℓ): the marginal cost of one more visit. ∞−∞ is mapped to
    /// ∞ so dead configurations stay dead.
    pub fn phi_increment(&self, ell: u64) -> f64 {
        let a = self.phi(ell);
        let b = self.phi(ell + 1);
        if b == f64::INFINITY {
            f64::INFINITY
        } else {
            b - a
        }
    }

    /// Smallest ℓ beyond which increments are constant, when one exists.
    /// Used to decide whether a finite path-state space is available.
    pub fn increment_saturates_at(&self) -> Option<u64> {
        match self {
            Potential::Free => Some(0),
            Potential::Saw => Some(2),
            Potential::Sausage { .. } => Some(1),
            Potential::TwoColor { .. } => Some(2),
            Potential::Reinforced { betas } => Some(betas.len() as u64),
            Potential::Custom { table } => Some(table.len() as u64),
            Potential::DombJoyce { .. } | Potential::Annealed { .. } => None,
        }
    }

    /// Scan φ(ℓ₁+ℓ₂) against φ(ℓ₁)+φ(ℓ₂) for all ℓ₁+ℓ₂ ≤ ell_max.
    ///
    /// A potential witnessing only the superadditive (resp. subadditive)
    /// inequality is repulsive (resp. attractive); degenerate additive
    /// potentials (both hold everywhere, e.g. φ ≡ 0 or exactly linear φ)
    /// report as repulsive, matching their free-walk dichotomy behavior.
    pub fn classify(&self, ell_max: u64) -> PotentialClass {
        assert!(ell_max >= 2, "classification needs ell_max >= 2");
        let phi: Vec<f64> = (0..=ell_max).map(|l| self.phi(l)).collect();
        let mut superadditive = true;
        let mut subadditive = true;
        for l1 in 1..ell_max {
            for l2 in l1..=(ell_max - l1) {
                let joint = phi[(l1 + l2) as usize];
                let split = phi[l1 as usize] + phi[l2 as usize];
                if !(joint >= split) {
                    superadditive = false;
                }
                if !(joint <= split) {
                    subadditive = false;
                }
            }
        }
        match (superadditive, subadditive) {
            (true, _) => PotentialClass::Repulsive,
            (false, true) => PotentialClass::Attractive,
            (false, false) => PotentialClass::Neither,
        }
    }

    /// φ(ell_max)/ell_max: an estimate of the linear part α = lim φ(ℓ)/ℓ.
    /// For subadditive φ the ratio is non-increasing, so this is an upper
    /// bound on α; 0 is always a lower bound.
    pub fn linear_rate(&self, ell_max: u64) -> f64 {
        self.phi(ell_max) / ell_max as f64
    }
}

/// Ensemble parameters: pulling force F, killing/conjugate parameter λ.
///
/// Canonical (fixed-n) computations set λ = 0 and fix n at the call site;
/// grand-canonical ones require λ above the free energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub force: Vec<f64>,
    pub lambda: f64,
}

impl EnsembleParams {
    pub fn canonical(force: Vec<f64>) -> Self {
        EnsembleParams { force, lambda: 0.0 }
    }

    pub fn grand(force: Vec<f64>, lambda: f64) -> Self {
        EnsembleParams { force, lambda }
    }

    pub fn zero(d: usize) -> Self {
        EnsembleParams {
            force: vec![0.0; d],
            lambda: 0.0,
        }
    }
}

/// Φ(γ) = Σ_x φ(ℓ_x(γ)); ∞ propagates (it is a value, not an error).
pub fn interaction_energy(path: &Path, pot: &Potential) -> f64 {
    local_times(path)
        .counts()
        .values()
        .map(|&l| pot.phi(l))
        .sum()
}

/// ln of the Gibbs weight e^{−Φ(γ) − λ|γ| + ⟨F, D(γ)⟩}; −∞ encodes weight 0.
pub fn log_path_weight(path: &Path, pot: &Potential, params: &EnsembleParams) -> f64 {
    let phi = interaction_energy(path, pot);
    if phi == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    let disp: LatticeVector = path.displacement();
    -phi - params.lambda * path.len() as f64 + disp.dot_f(&params.force)
}

/// The Gibbs weight itself. Underflows to 0 for very long chains; prefer
/// [`log_path_weight`] wherever weights multiply.
pub fn path_weight(path: &Path, pot: &Potential, params: &EnsembleParams) -> f64 {
    log_path_weight(path, pot, params).exp()
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Free => write!(f, "free"),
            Potential::Saw => write!(f, "saw"),
            Potential::DombJoyce { beta } => write!(f, "domb-joyce:{beta}"),
            Potential::Sausage { beta } => write!(f, "sausage:{beta}"),
            Potential::Reinforced { betas } => {
                let s: Vec<String> = betas.iter().map(|b| b.to_string()).collect();
                write!(f, "reinforced:{}", s.join(","))
            }
            Potential::Annealed { dist } => match dist {
                VDist::PointMass { value } => write!(f, "annealed:point({value})"),
                VDist::Bernoulli { p, b } => write!(f, "annealed:bernoulli({p},{b})"),
                VDist::Uniform { b } => write!(f, "annealed:uniform({b})"),
            },
            Potential::TwoColor { beta } => write!(f, "two-color:{beta}"),
            Potential::Custom { table } => {
                let s: Vec<String> = table.iter().map(|b| b.to_string()).collect();
                write!(f, "custom:{}", s.join(","))
            }
        }
    }
}

impl FromStr for Potential {
    type Err = PolyError;

    /// Compact text form used on the command line, e.g. `saw`,
    /// `sausage:1.0`, `domb-joyce:0.5`, `reinforced:1,0.5,0.25`,
    /// `annealed:bernoulli(0.5,1)`, `two-color:2`, `custom:0.1,0.3`.
    fn from_str(s: &str) -> Result<Self, PolyError> {
        let s = s.trim();
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        let one = |rest: Option<&str>| -> Result<f64, PolyError> {
            rest.ok_or_else(|| PolyError::Format(format!("{kind} needs a parameter")))?
                .trim()
                .parse::<f64>()
                .map_err(|_| PolyError::Format(format!("bad parameter for {kind}")))
        };
        let list = |rest: Option<&str>| -> Result<Vec<f64>, PolyError> {
            rest.unwrap_or("")
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| PolyError::Format(format!("bad list entry {t:?}")))
                })
                .collect()
        };
        match kind {
            "free" => Ok(Potential::Free),
            "saw" => Ok(Potential::Saw),
            "domb-joyce" | "domb_joyce" => Ok(Potential::DombJoyce { beta: one(rest)? }),
            "sausage" => Ok(Potential::Sausage { beta: one(rest)? }),
            "two-color" | "two_color" => Ok(Potential::TwoColor { beta: one(rest)? }),
            "reinforced" => {
                let betas = list(rest)?;
                if betas.is_empty() {
                    return Err(PolyError::Format("reinforced needs at least one beta".into()));
                }
                if betas.windows(2).any(|w| w[1] > w[0]) || betas.iter().any(|&b| b < 0.0) {
                    return Err(PolyError::Format(
                        "reinforced betas must be non-negative and non-increasing".into(),
                    ));
                }
                Ok(Potential::Reinforced { betas })
            }
            "custom" => Ok(Potential::Custom { table: list(rest)? }),
            "annealed" => {
                let r = rest.ok_or_else(|| {
                    PolyError::Format("annealed needs a distribution, e.g. bernoulli(0.5,1)".into())
                })?;
                let r = r.trim();
                let (dname, args) = r
                    .split_once('(')
                    .and_then(|(n, a)| a.strip_suffix(')').map(|a| (n, a)))
                    .ok_or_else(|| PolyError::Format(format!("bad annealed spec {r:?}")))?;
                let nums: Vec<f64> = args
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| PolyError::Format(format!("bad number {t:?}")))
                    })
                    .collect::<Result<_, _>>()?;
                let dist = match (dname.trim(), nums.as_slice()) {
                    ("point", [v]) => VDist::PointMass { value: *v },
                    ("bernoulli", [p, b]) => VDist::Bernoulli { p: *p, b: *b },
                    ("uniform", [b]) => VDist::Uniform { b: *b },
                    _ => {
                        return Err(PolyError::Format(format!(
                            "unknown annealed distribution {dname:?}"
                        )))
                    }
                };
                dist.validate()?;
                Ok(Potential::Annealed { dist })
            }
            other => Err(PolyError::Format(format!("unknown potential kind {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Path;

    #[test]
    fn sausage_energy_counts_distinct_sites() {
        // γ = (0, 1, 0) visits two distinct sites.
        let p = Path::from_steps(1, &[1, -1]).unwrap();
        let beta = 0.7;
        let e = interaction_energy(&p, &Potential::Sausage { beta });
        assert!((e - 2.0 * beta).abs() < 1e-15);
    }

    #[test]
    fn domb_joyce_energy() {
        // φ(2) = β at the origin, φ(1) = 0 at site 1.
        let p = Path::from_steps(1, &[1, -1]).unwrap();
        let beta = 1.3;
        let e = interaction_energy(&p, &Potential::DombJoyce { beta });
        assert!((e - beta).abs() < 1e-15);
    }

    #[test]
    fn saw_energy_is_infinite_on_revisit() {
        let p = Path::from_steps(1, &[1, -1]).unwrap();
        assert_eq!(interaction_energy(&p, &Potential::Saw), f64::INFINITY);
        let params = EnsembleParams::zero(1);
        assert_eq!(log_path_weight(&p, &Potential::Saw, &params), f64::NEG_INFINITY);
        assert_eq!(path_weight(&p, &Potential::Saw, &params), 0.0);
    }

    #[test]
    fn free_weight_is_one() {
        let p = Path::from_steps(2, &[1, 2, -1]).unwrap();
        let params = EnsembleParams::zero(2);
        assert_eq!(log_path_weight(&p, &Potential::Free, &params), 0.0);
    }

    #[test]
    fn tilted_sausage_weight() {
        // γ = (0,1,2), Φ = 3β, ⟨F, D⟩ = 0.5·2, λ = 0.
        let p = Path::from_steps(1, &[1, 1]).unwrap();
        let pot = Potential::Sausage { beta: 1.0 };
        let params = EnsembleParams::canonical(vec![0.5]);
        let lw = log_path_weight(&p, &pot, &params);
        assert!((lw - (-3.0 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn weight_factorizes() {
        let p = Path::from_steps(2, &[1, 1, 2, -1]).unwrap();
        let pot = Potential::DombJoyce { beta: 0.4 };
        let params = EnsembleParams::grand(vec![0.3, -0.2], 0.9);
        let lw = log_path_weight(&p, &pot, &params);
        let phi = interaction_energy(&p, &pot);
        let tilt = p.displacement().dot_f(&params.force);
        assert!((lw - (-phi - 0.9 * p.len() as f64 + tilt)).abs() < 1e-13);
    }

    #[test]
    fn classification_of_catalog() {
        assert_eq!(Potential::Saw.classify(10), PotentialClass::Repulsive);
        assert_eq!(
            Potential::DombJoyce { beta: 0.5 }.classify(10),
            PotentialClass::Repulsive
        );
        assert_eq!(
            Potential::Sausage { beta: 0.5 }.classify(10),
            PotentialClass::Attractive
        );
        assert_eq!(
            Potential::TwoColor { beta: 1.0 }.classify(10),
            PotentialClass::Attractive
        );
        assert_eq!(
            Potential::Reinforced {
                betas: vec![1.0, 0.5, 0.25]
            }
            .classify(12),
            PotentialClass::Attractive
        );
        // Mixed increments: first superadditive then strongly subadditive.
        assert_eq!(
            Potential::Custom {
                table: vec![1.0, 3.0, 3.1]
            }
            .classify(6),
            PotentialClass::Neither
        );
    }

    #[test]
    fn annealed_bernoulli_is_attractive() {
        let pot = Potential::Annealed {
            dist: VDist::Bernoulli { p: 0.5, b: 1.0 },
        };
        assert_eq!(pot.classify(6), PotentialClass::Attractive);
        // φ(1) = −log((1 + e^{−1})/2)
        let expect = -(0.5 * (1.0 + (-1.0f64).exp())).ln();
        assert!((pot.phi(1) - expect).abs() < 1e-14);
    }

    #[test]
    fn annealed_edge_cases() {
        let zero = VDist::PointMass { value: 0.0 };
        for l in 0..6 {
            assert_eq!(annealed_phi(&zero, l).unwrap(), 0.0);
        }
        let c = VDist::PointMass { value: 0.8 };
        for l in 1..6 {
            let v = annealed_phi(&c, l).unwrap();
            assert!((v - 0.8 * l as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn annealed_uniform_quadrature_matches_closed_form() {
        let dist = VDist::Uniform { b: 2.0 };
        for l in 1..8u64 {
            let t = l as f64;
            let exact = (1.0 - (-t * 2.0).exp()) / (t * 2.0);
            assert!((dist.laplace(t) - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn annealed_phi_is_subadditive_and_sublinear() {
        let dist = VDist::Bernoulli { p: 0.3, b: 2.0 };
        let phi: Vec<f64> = (0..=32).map(|l| annealed_phi(&dist, l).unwrap()).collect();
        for a in 1..16 {
            for b in a..=(32 - a) {
                assert!(phi[a + b] <= phi[a] + phi[b] + 1e-12);
            }
        }
        let mut prev = f64::INFINITY;
        for l in 1..=32 {
            let rate = phi[l] / l as f64;
            assert!(rate <= prev + 1e-12);
            prev = rate;
        }
    }

    #[test]
    fn negative_support_rejected() {
        assert!(annealed_phi(&VDist::PointMass { value: -1.0 }, 2).is_err());
    }

    #[test]
    fn custom_extends_last_increment() {
        let pot = Potential::Custom {
            table: vec![0.5, 1.5],
        };
        assert_eq!(pot.phi(2), 1.5);
        assert!((pot.phi(4) - 3.5).abs() < 1e-15);
        assert_eq!(pot.increment_saturates_at(), Some(2));
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "free",
            "saw",
            "domb-joyce:0.5",
            "sausage:1",
            "reinforced:1,0.5,0.25",
            "annealed:bernoulli(0.5,1)",
            "annealed:uniform(2)",
            "annealed:point(0.3)",
            "two-color:2",
            "custom:0.1,0.3,0.4",
        ] {
            let p: Potential = s.parse().unwrap();
            let back: Potential = p.to_string().parse().unwrap();
            assert_eq!(p, back, "round trip failed for {s}");
        }
        assert!("bogus".parse::<Potential>().is_err());
        assert!("reinforced:0.5,1.0".parse::<Potential>().is_err());
    }

    #[test]
    fn toml_potential_specs() {
        let p: Potential = toml::from_str("kind = \"sausage\"\nbeta = 1.5").unwrap();
        assert_eq!(p, Potential::Sausage { beta: 1.5 });
        let p: Potential =
            toml::from_str("kind = \"annealed\"\ndist = \"bernoulli\"\np = 0.5\nb = 1.0").unwrap();
        assert!(matches!(p, Potential::Annealed { .. }));
    }
}
