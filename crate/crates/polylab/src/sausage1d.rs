//! Exact dynamic-programming solver for the 1d discrete sausage
//! (φ(ℓ) = β 1{ℓ≥1}), plus the simple-random-walk reference quantities and
//! the two-color probe.
//!
//! In d=1 the visited range [−a, b] is a sufficient statistic for the
//! sausage energy Φ = β(a+b+1), so the DP state is (a, b, p) with p the
//! current position. The tables hold raw path *counts* N_n[a,b,p]; β, F and
//! λ enter only at readout, which keeps one sweep valid for a whole
//! parameter grid. Counts fit f64 up to n ≈ 1000 (2^n < 1.8e308); above the
//! default cap the solver refuses.
//!
//! The two-color potential φ₂(ℓ) = β1{ℓ≥1} + β1{ℓ≥2} admits no such small
//! statistic: once-visited sites can form several disconnected islands
//! inside the range (walk right, settle, walk further right, settle again),
//! so any fixed-size envelope of twice-visited sites misrepresents Φ₂. Its
//! probe therefore runs on exact enumeration at reduced n.

use std::collections::BTreeMap;

use crate::enumerate::{enumerate_layers, EnumConfig};
use crate::error::{PolyError, Result};
use crate::logspace::LogSum;
use crate::potential::Potential;

/// Hard cap for the DP sweep: n³-sized layers and f64 counts both stay
/// comfortable below this.
pub const DP_DEFAULT_CAP: usize = 400;

const LN2: f64 = std::f64::consts::LN_2;

/// One time-layer of the DP, indexed by s = a+b, a, and pi = p + a ∈ [0, s].
struct Layer {
    /// base[s] = Σ_{t<s} (t+1)²; block (s, a) starts at base[s] + a(s+1).
    base: Vec<usize>,
    data: Vec<f64>,
    s_max: usize,
}

impl Layer {
    fn new(s_max: usize) -> Layer {
        let mut base = Vec::with_capacity(s_max + 2);
        let mut acc = 0usize;
        for s in 0..=s_max + 1 {
            base.push(acc);
            acc += (s + 1) * (s + 1);
        }
        let total = base[s_max + 1];
        Layer {
            base,
            data: vec![0.0; total],
            s_max,
        }
    }

    #[inline]
    fn idx(&self, s: usize, a: usize, pi: usize) -> usize {
        self.base[s] + a * (s + 1) + pi
    }

    fn clear(&mut self) {
        self.data.fill(0.0);
    }
}

/// What to extract during a sweep.
pub struct SweepSpec {
    pub beta: f64,
    pub n_max: usize,
    /// Layers at which to snapshot the endpoint weight vector.
    pub readout_ns: Vec<usize>,
    /// Accumulate two-point partial sums G_{λ₀}(x) for x = 1..=x_max at
    /// λ₀ = ln 2 (0 skips the accumulation).
    pub g_x_max: usize,
    pub cap: usize,
}

impl SweepSpec {
    pub fn new(beta: f64, n_max: usize) -> SweepSpec {
        SweepSpec {
            beta,
            n_max,
            readout_ns: vec![n_max],
            g_x_max: 0,
            cap: DP_DEFAULT_CAP,
        }
    }
}

/// Result of a sweep: |γ|-resolved endpoint weights and optional G partials.
pub struct SweepResult {
    pub beta: f64,
    /// For each requested n: w[p + n] = ln Σ_{a,b} N_n[a,b,p] e^{−β(a+b+1)},
    /// so that ln Z_n^{F,λ} = ln Σ_p e^{w(p) + F·p} − λn.
    pub endpoint_logw: BTreeMap<usize, Vec<f64>>,
    /// g[x−1] = Σ_{n ≤ n_max} 2^{−n} Σ N_n[a,b,x] e^{−β(a+b+1)}: the capped
    /// series for G_{λ₀}(x), monotone from below in the cap.
    pub g_lambda0_partial: Vec<f64>,
}

/// Run the forward DP and collect the requested readouts.
pub fn sausage_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    if spec.n_max > spec.cap {
        return Err(PolyError::CapExceeded(format!(
            "sausage DP n={} exceeds cap {}; layer size grows like n³",
            spec.n_max, spec.cap
        )));
    }
    let n_max = spec.n_max;
    let mut cur = Layer::new(n_max);
    let mut nxt = Layer::new(n_max);
    let i0 = cur.idx(0, 0, 0);
    cur.data[i0] = 1.0;

    // e^{−β(s+1)} per s
    let site_w: Vec<f64> = (0..=n_max + 1)
        .map(|s| (-spec.beta * (s as f64 + 1.0)).exp())
        .collect();
    let mut pow2neg = 1.0f64; // 2^{−n} for the G accumulation

    let mut endpoint_logw = BTreeMap::new();
    let mut g_partial = vec![0.0f64; spec.g_x_max];

    let snapshot = |layer: &Layer, n: usize, beta: f64| -> Vec<f64> {
        let mut per_p: Vec<LogSum> = vec![LogSum::new(); 2 * n + 1];
        for s in 0..=n {
            for a in 0..=s {
                let blk = layer.idx(s, a, 0);
                for pi in 0..=s {
                    let c = layer.data[blk + pi];
                    if c > 0.0 {
                        let p = pi as i64 - a as i64;
                        per_p[(p + n as i64) as usize]
                            .add(c.ln() - beta * (s as f64 + 1.0));
                    }
                }
            }
        }
        per_p.iter().map(|l| l.value()).collect()
    };

    if spec.readout_ns.contains(&0) {
        endpoint_logw.insert(0, snapshot(&cur, 0, spec.beta));
    }

    for n in 1..=n_max {
        nxt.clear();
        for s in 0..n {
            for a in 0..=s {
                let blk = cur.idx(s, a, 0);
                for pi in 0..=s {
                    let c = cur.data[blk + pi];
                    if c == 0.0 {
                        continue;
                    }
                    // step right: p+1 ≤ b ⟺ pi+1 ≤ s
                    if pi + 1 <= s {
                        let j = nxt.idx(s, a, pi + 1);
                        nxt.data[j] += c;
                    } else {
                        let j = nxt.idx(s + 1, a, pi + 1);
                        nxt.data[j] += c;
                    }
                    // step left: p−1 ≥ −a ⟺ pi ≥ 1
                    if pi >= 1 {
                        let j = nxt.idx(s, a, pi - 1);
                        nxt.data[j] += c;
                    } else {
                        let j = nxt.idx(s + 1, a + 1, pi);
                        nxt.data[j] += c;
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut nxt);
        pow2neg *= 0.5;

        if spec.readout_ns.contains(&n) {
            endpoint_logw.insert(n, snapshot(&cur, n, spec.beta));
        }
        // G_{λ₀}(x) accumulation: only cells with p = x contribute
        for x in 1..=spec.g_x_max {
            if (n + x) % 2 != 0 || x > n {
                continue;
            }
            let mut add = 0.0f64;
            for s in x..=n {
                for a in 0..=(s - x) {
                    let pi = x + a;
                    let c = cur.data[cur.idx(s, a, pi)];
                    if c > 0.0 {
                        add += c * site_w[s];
                    }
                }
            }
            g_partial[x - 1] += add * pow2neg;
        }
    }

    Ok(SweepResult {
        beta: spec.beta,
        endpoint_logw,
        g_lambda0_partial: g_partial,
    })
}

/// Exact partition data at one (n, F, λ).
#[derive(Clone, Debug)]
pub struct DpPartition {
    pub n: usize,
    pub log_z: f64,
    /// (p, probability) for every reachable endpoint, summing to 1.
    pub endpoint_law: Vec<(i64, f64)>,
}

/// ln Z_n^{F,λ} and the exact endpoint law for the 1d sausage.
pub fn dp_partition(beta: f64, n: usize, force: f64, lambda: f64) -> Result<DpPartition> {
    let spec = SweepSpec::new(beta, n);
    let res = sausage_sweep(&spec)?;
    let w = &res.endpoint_logw[&n];
    Ok(partition_from_logw(w, n, force, lambda))
}

fn partition_from_logw(w: &[f64], n: usize, force: f64, lambda: f64) -> DpPartition {
    let mut z = LogSum::new();
    for (i, &lw) in w.iter().enumerate() {
        if lw > f64::NEG_INFINITY {
            let p = i as i64 - n as i64;
            z.add(lw + force * p as f64);
        }
    }
    let log_z = z.value() - lambda * n as f64;
    let mut law = Vec::new();
    for (i, &lw) in w.iter().enumerate() {
        if lw > f64::NEG_INFINITY {
            let p = i as i64 - n as i64;
            law.push((p, (lw + force * p as f64 - z.value()).exp()));
        }
    }
    DpPartition { n, log_z, endpoint_law: law }
}

/// One row of the stretching probe near the critical force.
#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub n: usize,
    pub alpha: f64,
    /// ln P_n^{αh}(D/n > ε).
    pub log_tail_prob: f64,
    /// v̄ = E[D]/n under P_n^{αh}.
    pub vbar: f64,
}

/// Tail probabilities P_n^{αh}(D/n > ε) and drifts across an (α, n) grid.
///
/// h defaults to ξ_{λ₀}(1) = β for the sausage, the critical-force scale;
/// a caller-supplied h decouples the probe from that identity.
pub fn transition_probe(
    beta: f64,
    eps: f64,
    alphas: &[f64],
    n_list: &[usize],
    h: Option<f64>,
) -> Result<Vec<ProbeRow>> {
    let h = h.unwrap_or(beta);
    let n_max = *n_list.iter().max().ok_or_else(|| {
        PolyError::Config("transition_probe needs at least one n".into())
    })?;
    let spec = SweepSpec {
        beta,
        n_max,
        readout_ns: n_list.to_vec(),
        g_x_max: 0,
        cap: DP_DEFAULT_CAP,
    };
    let res = sausage_sweep(&spec)?;
    let mut rows = Vec::new();
    for &n in n_list {
        let w = &res.endpoint_logw[&n];
        for &alpha in alphas {
            let f = alpha * h;
            let mut z = LogSum::new();
            let mut tail = LogSum::new();
            let mut mean = 0.0f64;
            // two passes: normalizer first, then moments in probability scale
            for (i, &lw) in w.iter().enumerate() {
                if lw > f64::NEG_INFINITY {
                    let p = i as i64 - n as i64;
                    z.add(lw + f * p as f64);
                }
            }
            let log_z = z.value();
            for (i, &lw) in w.iter().enumerate() {
                if lw > f64::NEG_INFINITY {
                    let p = i as i64 - n as i64;
                    let lp = lw + f * p as f64 - log_z;
                    if (p as f64) > eps * n as f64 {
                        tail.add(lp);
                    }
                    mean += lp.exp() * p as f64;
                }
            }
            rows.push(ProbeRow {
                n,
                alpha,
                log_tail_prob: tail.value(),
                vbar: mean / n as f64,
            });
        }
    }
    Ok(rows)
}

/// ln C(n, k) by direct summation; exact enough for n in the hundreds.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut acc = 0.0f64;
    for i in 0..k {
        acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    acc
}

/// ln P_SRW(X_n = x) for the 1d simple walk; −∞ off parity.
pub fn srw_log_point_prob(n: usize, x: i64) -> f64 {
    if x.unsigned_abs() as usize > n || (n as i64 + x) % 2 != 0 {
        return f64::NEG_INFINITY;
    }
    let k = ((n as i64 + x) / 2) as usize;
    log_binomial(n, k) - n as f64 * LN2
}

/// Number of n-step walks from 0 staying in [0, m) at every step ≥ 1,
/// as ln of the count (band-restricted reflection-free DP).
pub fn srw_confined_log_count(n: usize, m: i64) -> f64 {
    if m < 1 {
        return f64::NEG_INFINITY;
    }
    let m = m as usize;
    let mut cur = vec![0.0f64; m];
    cur[0] = 1.0;
    let mut scale = 0.0f64; // accumulated ln-rescaling
    for _ in 0..n {
        let mut nxt = vec![0.0f64; m];
        for p in 0..m {
            let c = cur[p];
            if c == 0.0 {
                continue;
            }
            if p + 1 < m {
                nxt[p + 1] += c;
            }
            if p >= 1 {
                nxt[p - 1] += c;
            }
        }
        let mx = nxt.iter().cloned().fold(0.0f64, f64::max);
        if mx == 0.0 {
            return f64::NEG_INFINITY;
        }
        if mx > 1e280 {
            for v in &mut nxt {
                *v /= mx;
            }
            scale += mx.ln();
        }
        cur = nxt;
    }
    scale + cur.iter().sum::<f64>().ln()
}

/// Ruin probability P(hit x before −1 | start 0) for the symmetric walk,
/// solved from the harmonic boundary-value problem (Thomas algorithm).
pub fn ruin_probability_solved(x: i64) -> f64 {
    assert!(x >= 1);
    // unknowns h(0..x−1); boundaries h(−1) = 0, h(x) = 1 fold into the rhs:
    // 2h(0) − h(1) = 0, −h(i−1) + 2h(i) − h(i+1) = 0, −h(m−2) + 2h(m−1) = 1
    let m = x as usize;
    let mut cp = vec![0.0f64; m];
    let mut dp = vec![0.0f64; m];
    cp[0] = -0.5;
    dp[0] = if m == 1 { 0.5 } else { 0.0 };
    for i in 1..m {
        let piv = 2.0 + cp[i - 1];
        let rhs_i = if i == m - 1 { 1.0 } else { 0.0 };
        cp[i] = -1.0 / piv;
        dp[i] = (rhs_i + dp[i - 1]) / piv;
    }
    let mut h = dp[m - 1];
    for i in (0..m - 1).rev() {
        h = dp[i] - cp[i] * h;
    }
    h
}

/// Numeric verification of the displayed proof inequalities at one (β,n,x):
/// the sub-additivity upper bound on the pinned partition function, the
/// capped lower bound on the two-point function, the ruin identity, and the
/// box-confinement lower bound on the full partition function.
#[derive(Clone, Debug)]
pub struct ProofReport {
    pub beta: f64,
    pub n: usize,
    pub x: i64,
    /// ln Z_{n,x}^{λ₀} vs ln(e^{−βx} P_SRW(X_n = x)); slack = rhs − lhs ≥ 0.
    pub numerator_lhs: f64,
    pub numerator_rhs: f64,
    /// capped G_{λ₀}(x) vs e^{−β(x+1)}/(x+1); slack = lhs − rhs ≥ 0.
    /// (A path held in [0, x] visits x+1 sites, the start included, so the
    /// ruin-restricted mass carries e^{−β(x+1)}.)
    pub g_partial: f64,
    pub g_lower_bound: f64,
    /// solved ruin probability vs 1/(x+1); equal to machine precision.
    pub ruin_solved: f64,
    pub ruin_exact: f64,
    /// chain ln Z_n^{αh} ≥ ln Z_n^{αh}[confined] ≥ −β⌈M⌉ + ln #confined,
    /// with M = (n/β)^{1/3}.
    pub denom_full: f64,
    pub denom_confined: f64,
    pub denom_bound: f64,
    pub m_box: f64,
}

impl ProofReport {
    pub fn all_hold(&self) -> bool {
        self.numerator_lhs <= self.numerator_rhs + 1e-12
            && self.g_partial >= self.g_lower_bound - 1e-15
            && (self.ruin_solved - self.ruin_exact).abs() < 1e-10
            && self.denom_full >= self.denom_confined - 1e-12
            && self.denom_confined >= self.denom_bound - 1e-12
    }
}

pub fn proof_quantity_check(
    beta: f64,
    n: usize,
    x: i64,
    alpha: f64,
    g_cap: usize,
) -> Result<ProofReport> {
    assert!(x >= 1 && beta > 0.0);
    let xs = x as usize;
    let spec = SweepSpec {
        beta,
        n_max: g_cap.max(n),
        readout_ns: vec![n],
        g_x_max: xs,
        cap: DP_DEFAULT_CAP,
    };
    let res = sausage_sweep(&spec)?;
    let w = &res.endpoint_logw[&n];
    let numerator_lhs = w[(x + n as i64) as usize] - n as f64 * LN2;
    let numerator_rhs = -beta * x as f64 + srw_log_point_prob(n, x);

    let g_partial = res.g_lambda0_partial[xs - 1];
    let g_lower_bound = (-beta * (x as f64 + 1.0)).exp() / (x as f64 + 1.0);

    let ruin_solved = ruin_probability_solved(x);
    let ruin_exact = 1.0 / (x as f64 + 1.0);

    // denominator chain at F = αh, h = β
    let f = alpha * beta;
    let part = partition_from_logw(w, n, f, LN2);
    let denom_full = part.log_z;
    let m_box = (n as f64 / beta).powf(1.0 / 3.0);
    let m_int = m_box.ceil().max(1.0) as i64;
    let denom_confined = confined_sausage_log_z(beta, n, f, m_int) - n as f64 * LN2;
    let denom_bound =
        -beta * m_int as f64 + srw_confined_log_count(n, m_int) - n as f64 * LN2;

    Ok(ProofReport {
        beta,
        n,
        x,
        numerator_lhs,
        numerator_rhs,
        g_partial,
        g_lower_bound,
        ruin_solved,
        ruin_exact,
        denom_full,
        denom_confined,
        denom_bound,
        m_box,
    })
}

/// ln Σ over paths confined to [0, m) of e^{−β·range + F·end}: paths never
/// go below 0, so the range is b+1 with b the right extent; the state
/// (b, p) suffices.
fn confined_sausage_log_z(beta: f64, n: usize, force: f64, m: i64) -> f64 {
    let m = m as usize;
    // counts[b][p], p ≤ b < m
    let mut cur = vec![vec![0.0f64; m]; m];
    cur[0][0] = 1.0;
    let mut scale = 0.0f64;
    for _ in 0..n {
        let mut nxt = vec![vec![0.0f64; m]; m];
        let mut mx = 0.0f64;
        for b in 0..m {
            for p in 0..=b {
                let c = cur[b][p];
                if c == 0.0 {
                    continue;
                }
                if p + 1 <= b {
                    nxt[b][p + 1] += c;
                } else if b + 1 < m {
                    nxt[b + 1][p + 1] += c;
                }
                if p >= 1 {
                    nxt[b][p - 1] += c;
                }
            }
        }
        for b in 0..m {
            for p in 0..=b {
                mx = mx.max(nxt[b][p]);
            }
        }
        if mx == 0.0 {
            return f64::NEG_INFINITY;
        }
        if mx > 1e280 {
            for row in &mut nxt {
                for v in row.iter_mut() {
                    *v /= mx;
                }
            }
            scale += mx.ln();
        }
        cur = nxt;
    }
    let mut acc = LogSum::new();
    for b in 0..m {
        for p in 0..=b {
            let c = cur[b][p];
            if c > 0.0 {
                acc.add(scale + c.ln() - beta * (b as f64 + 1.0) + force * p as f64);
            }
        }
    }
    acc.value()
}

/// Ballisticity comparison for the two-color potential, by exact
/// enumeration (see the module docs for why no small DP statistic exists).
#[derive(Clone, Debug)]
pub struct TwoColorReport {
    pub beta: f64,
    /// (n, E|D|/n) under the canonical measure: the crude extension readout.
    pub extension_per_n: Vec<(usize, f64)>,
    /// (x, E[|γ|]/x) under the pinned λ₀-measure P_x: the inverse speed;
    /// bounded in x for a ballistic critical polymer, growing for a
    /// diffusive one.
    pub pinned_inverse_speed: Vec<(i64, f64)>,
}

pub fn two_color_probe(
    beta: f64,
    n_max: usize,
    x_list: &[i64],
    cfg: &EnumConfig,
) -> Result<TwoColorReport> {
    let pot = Potential::TwoColor { beta };
    let layers = enumerate_layers(&pot, 1, n_max, cfg)?;
    let mut extension = Vec::new();
    for n in (2..=n_max).step_by(4) {
        let layer = layers.layer(n);
        let mut z = LogSum::new();
        for v in layer.values() {
            z.add(*v);
        }
        let zv = z.value();
        let mut mean_abs = 0.0;
        for (x, v) in &layer {
            mean_abs += (v - zv).exp() * x.coords()[0].abs() as f64;
        }
        extension.push((n, mean_abs / n as f64));
    }
    let mut pinned = Vec::new();
    for &x in x_list {
        let key = crate::lattice::LatticeVector::new(vec![x]);
        let mut z = LogSum::new();
        let mut terms = Vec::new();
        for n in 0..=n_max {
            let lw = layers.log_z_endpoint_raw(n, &key) - LN2 * n as f64;
            if lw > f64::NEG_INFINITY {
                z.add(lw);
                terms.push((n, lw));
            }
        }
        let zv = z.value();
        let mean_n: f64 = terms
            .iter()
            .map(|&(n, lw)| (lw - zv).exp() * n as f64)
            .sum();
        pinned.push((x, mean_n / x as f64));
    }
    Ok(TwoColorReport {
        beta,
        extension_per_n: extension,
        pinned_inverse_speed: pinned,
    })
}
