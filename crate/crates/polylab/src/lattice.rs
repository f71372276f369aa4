//! Lattice geometry: sites of Z^d, nearest-neighbor paths, local times.
//!
//! Every ensemble fixes a dimension d ≥ 1 once; all vectors in it carry d
//! coordinates. Paths start at the origin unless explicitly offset and move
//! by unit steps. Types are immutable after construction and safe to share
//! across parallel workers.

use std::collections::HashMap;
use std::fmt;

use crate::error::PolyError;

/// A site (or displacement) of Z^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVector {
    coords: Vec<i64>,
}

impl LatticeVector {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticeVector { coords }
    }

    pub fn zero(d: usize) -> Self {
        LatticeVector { coords: vec![0; d] }
    }

    /// Unit vector along `axis` (0-based), positive orientation.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut coords = vec![0; d];
        coords[axis] = 1;
        LatticeVector { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn add(&self, other: &LatticeVector) -> LatticeVector {
        LatticeVector {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &LatticeVector) -> LatticeVector {
        LatticeVector {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn neg(&self) -> LatticeVector {
        LatticeVector {
            coords: self.coords.iter().map(|a| -a).collect(),
        }
    }

    pub fn l1_norm(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.coords.iter().map(|c| (*c as f64).powi(2)).sum::<f64>()).sqrt()
    }

    /// ⟨f, x⟩ against a real vector.
    pub fn dot_f(&self, f: &[f64]) -> f64 {
        self.coords
            .iter()
            .zip(f)
            .map(|(c, fi)| *c as f64 * fi)
            .sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|&c| c as f64).collect()
    }
}

impl fmt::Debug for LatticeVector {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "{:?}", self.coords)
    }
}

/// A signed unit step: axis 0..d-1, sign ±1.
///
/// The canonical step alphabet is ordered +1, −1, +2, −2, …, ±d to make
/// depth-first traversals reproducible. In the serialized path format a step
/// is written as that signed integer.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Step {
    pub axis: usize,
    pub sign: i64,
}

impl Step {
    /// All 2d steps in canonical order.
    pub fn alphabet(d: usize) -> Vec<Step> {
        let mut v = Vec::with_capacity(2 * d);
        for axis in 0..d {
            v.push(Step { axis, sign: 1 });
            v.push(Step { axis, sign: -1 });
        }
        v
    }

    /// Encode as the serialized signed integer (+1, −1, …, +d, −d).
    pub fn code(&self) -> i64 {
        self.sign * (self.axis as i64 + 1)
    }

    pub fn from_code(code: i64, d: usize) -> Result<Step, PolyError> {
        let axis = code.unsigned_abs() as usize;
        if code == 0 || axis > d {
            return Err(PolyError::Format(format!(
                "step code {code} out of range for d={d}"
            )));
        }
        Ok(Step {
            axis: axis - 1,
            sign: code.signum(),
        })
    }

    pub fn vector(&self, d: usize) -> LatticeVector {
        let mut coords = vec![0; d];
        coords[self.axis] = self.sign;
        LatticeVector { coords }
    }
}

/// A nearest-neighbor path γ = (γ(0), …, γ(n)); |γ| = n counts steps.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Path {
    vertices: Vec<LatticeVector>,
}

impl Path {
    /// Build from explicit vertices, checking the unit-step invariant.
    pub fn new(vertices: Vec<LatticeVector>) -> Result<Path, PolyError> {
        if vertices.is_empty() {
            return Err(PolyError::Format("path needs at least one vertex".into()));
        }
        let d = vertices[0].dim();
        for w in vertices.windows(2) {
            if w[1].dim() != d || w[1].sub(&w[0]).l1_norm() != 1 {
                return Err(PolyError::Format(
                    "consecutive vertices must differ by one unit step".into(),
                ));
            }
        }
        Ok(Path { vertices })
    }

    /// The zero-step path at the origin of Z^d.
    pub fn trivial(d: usize) -> Path {
        Path {
            vertices: vec![LatticeVector::zero(d)],
        }
    }

    /// Build from step codes (+1, −1, …, ±d), starting at the origin.
    pub fn from_steps(d: usize, codes: &[i64]) -> Result<Path, PolyError> {
        let mut vertices = Vec::with_capacity(codes.len() + 1);
        let mut pos = LatticeVector::zero(d);
        vertices.push(pos.clone());
        for &c in codes {
            let s = Step::from_code(c, d)?;
            pos = pos.add(&s.vector(d));
            vertices.push(pos.clone());
        }
        Ok(Path { vertices })
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    /// Number of steps |γ|.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertices(&self) -> &[LatticeVector] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &LatticeVector {
        &self.vertices[i]
    }

    pub fn start(&self) -> &LatticeVector {
        &self.vertices[0]
    }

    pub fn end(&self) -> &LatticeVector {
        self.vertices.last().unwrap()
    }

    /// D(γ) = γ(n) − γ(0).
    pub fn displacement(&self) -> LatticeVector {
        self.end().sub(self.start())
    }

    /// Step codes reconstructing the path.
    pub fn step_codes(&self) -> Vec<i64> {
        self.vertices
            .windows(2)
            .map(|w| {
                let diff = w[1].sub(&w[0]);
                let axis = diff.coords().iter().position(|&c| c != 0).unwrap();
                (axis as i64 + 1) * diff.coords()[axis].signum()
            })
            .collect()
    }

    /// Serialize to the one-line step format: comma-separated signed codes.
    pub fn to_line(&self) -> String {
        self.step_codes()
            .iter()
            .map(|c| format!("{c:+}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parse the one-line step format. An empty line is the trivial path.
    pub fn from_line(d: usize, line: &str) -> Result<Path, PolyError> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(Path::trivial(d));
        }
        let codes = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<i64>()
                    .map_err(|_| PolyError::Format(format!("bad step token {tok:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Path::from_steps(d, &codes)
    }

    /// Concatenate, translating `other` to start at our endpoint.
    pub fn concat(&self, other: &Path) -> Path {
        let shift = self.end().sub(other.start());
        let mut vertices = self.vertices.clone();
        vertices.extend(other.vertices[1..].iter().map(|v| v.add(&shift)));
        Path { vertices }
    }

    /// The sub-path γ(i..=j) (vertex indices, inclusive).
    pub fn segment(&self, i: usize, j: usize) -> Path {
        Path {
            vertices: self.vertices[i..=j].to_vec(),
        }
    }
}

/// Local times ℓ_x(γ): how many path indices sit at each visited site.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTimeField {
    counts: HashMap<LatticeVector, u64>,
}

impl LocalTimeField {
    pub fn counts(&self) -> &HashMap<LatticeVector, u64> {
        &self.counts
    }

    pub fn get(&self, x: &LatticeVector) -> u64 {
        self.counts.get(x).copied().unwrap_or(0)
    }

    /// Σ_x ℓ_x, always |γ| + 1.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// ℓ_x(γ) for every visited site.
pub fn local_times(path: &Path) -> LocalTimeField {
    let mut counts = HashMap::with_capacity(path.vertices.len());
    for v in &path.vertices {
        *counts.entry(v.clone()).or_insert(0) += 1;
    }
    LocalTimeField { counts }
}

/// D(γ) = γ(n) − γ(0) as a free function, mirroring the other path readouts.
pub fn displacement(path: &Path) -> LatticeVector {
    path.displacement()
}

/// A signed-permutation symmetry of Z^d (the hyperoctahedral group).
///
/// `perm[i]` is the source axis feeding output axis i, `signs[i]` its sign.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSymmetry {
    perm: Vec<usize>,
    signs: Vec<i64>,
}

impl LatticeSymmetry {
    pub fn apply(&self, v: &LatticeVector) -> LatticeVector {
        let coords = self
            .perm
            .iter()
            .zip(&self.signs)
            .map(|(&src, &sg)| sg * v.coords()[src])
            .collect();
        LatticeVector::new(coords)
    }

    /// All 2^d · d! signed permutations except the identity, in a fixed order.
    pub fn non_identity_elements(d: usize) -> Vec<LatticeSymmetry> {
        let mut perms = Vec::new();
        let mut idx: Vec<usize> = (0..d).collect();
        permutations(&mut idx, 0, &mut perms);
        let mut out = Vec::new();
        for perm in &perms {
            for mask in 0..(1u32 << d) {
                let signs: Vec<i64> = (0..d)
                    .map(|i| if mask & (1 << i) != 0 { -1 } else { 1 })
                    .collect();
                let sym = LatticeSymmetry {
                    perm: perm.clone(),
                    signs,
                };
                let is_identity = perm.iter().enumerate().all(|(i, &p)| p == i)
                    && sym.signs.iter().all(|&s| s == 1);
                if !is_identity {
                    out.push(sym);
                }
            }
        }
        out
    }
}

fn permutations(idx: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == idx.len() {
        out.push(idx.clone());
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permutations(idx, k + 1, out);
        idx.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_times_count_indices() {
        // d=1, γ = (0, 1, 0): two indices at 0, one at 1.
        let p = Path::from_steps(1, &[1, -1]).unwrap();
        let lt = local_times(&p);
        assert_eq!(lt.get(&LatticeVector::new(vec![0])), 2);
        assert_eq!(lt.get(&LatticeVector::new(vec![1])), 1);
        assert_eq!(lt.total(), 3);
    }

    #[test]
    fn trivial_path_has_unit_mass_at_origin() {
        let p = Path::trivial(2);
        let lt = local_times(&p);
        assert_eq!(lt.get(&LatticeVector::zero(2)), 1);
        assert_eq!(lt.total(), 1);
    }

    #[test]
    fn straight_path_has_all_ones() {
        let p = Path::from_steps(2, &[1, 1, 1, 1]).unwrap();
        let lt = local_times(&p);
        assert_eq!(lt.counts().len(), 5);
        assert!(lt.counts().values().all(|&c| c == 1));
    }

    #[test]
    fn displacement_examples() {
        let p = Path::from_steps(1, &[1, -1]).unwrap();
        assert_eq!(p.displacement(), LatticeVector::zero(1));
        let p = Path::from_steps(1, &[1, 1]).unwrap();
        assert_eq!(p.displacement(), LatticeVector::new(vec![2]));
        let p = Path::from_steps(3, &[2]).unwrap();
        assert_eq!(p.displacement(), LatticeVector::new(vec![0, 1, 0]));
    }

    #[test]
    fn line_format_round_trip() {
        let p = Path::from_steps(2, &[1, 2, -1, -2, 2]).unwrap();
        let line = p.to_line();
        assert_eq!(line, "+1,+2,-1,-2,+2");
        let q = Path::from_line(2, &line).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn bad_steps_rejected() {
        assert!(Path::from_steps(2, &[3]).is_err());
        assert!(Path::from_steps(2, &[0]).is_err());
        assert!(Path::from_line(2, "+1,oops").is_err());
    }

    #[test]
    fn symmetry_group_size() {
        assert_eq!(LatticeSymmetry::non_identity_elements(1).len(), 1);
        assert_eq!(LatticeSymmetry::non_identity_elements(2).len(), 7);
        assert_eq!(LatticeSymmetry::non_identity_elements(3).len(), 47);
    }

    #[test]
    fn symmetry_preserves_norm() {
        let v = LatticeVector::new(vec![3, -1]);
        for g in LatticeSymmetry::non_identity_elements(2) {
            assert_eq!(g.apply(&v).l1_norm(), v.l1_norm());
        }
    }

    #[test]
    fn concat_translates() {
        let a = Path::from_steps(2, &[1, 1]).unwrap();
        let b = Path::from_steps(2, &[2]).unwrap();
        let c = a.concat(&b);
        assert_eq!(c.len(), 3);
        assert_eq!(c.end(), &LatticeVector::new(vec![2, 1]));
    }
}
