// SPDX-License-Identifier: Apache-2.0

//! Signed coordinate permutations acting on grid fields.
//!
//! These are exactly the symmetries of the periodic lattice that fix the
//! origin, so their action on samples is a permutation and the group
//! average is an orthogonal projector.

use crate::grid::{GridSpec, RealField};

/// `x ↦ x'` with `x'[a] = ±x[perm[a]]`, the sign negative when `flip[a]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedPerm {
    perm: Vec<usize>,
    flip: Vec<bool>,
}

impl SignedPerm {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            flip: vec![false; n],
        }
    }

    pub fn new(perm: Vec<usize>, flip: Vec<bool>) -> Self {
        assert_eq!(perm.len(), flip.len());
        Self { perm, flip }
    }

    pub fn flips(&self) -> &[bool] {
        &self.flip
    }

    pub fn apply_point(&self, x: &[f64], out: &mut [f64]) {
        for a in 0..self.perm.len() {
            let v = x[self.perm[a]];
            out[a] = if self.flip[a] { -v } else { v };
        }
    }

    /// For each sample, the flat index of its image point.
    pub fn index_map(&self, grid: &GridSpec) -> Vec<u32> {
        let m = grid.points_per_axis();
        let n = grid.dimension();
        let mut idx = vec![0; n];
        let mut img = vec![0; n];
        (0..grid.len())
            .map(|flat| {
                grid.unflatten(flat, &mut idx);
                for a in 0..n {
                    let i = idx[self.perm[a]];
                    img[a] = if self.flip[a] { (m - i) % m } else { i };
                }
                grid.flatten(&img) as u32
            })
            .collect()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// All `2ᴺ·N!` signed permutations of ℝᴺ.
pub fn hyperoctahedral(n: usize) -> Vec<SignedPerm> {
    let mut out = Vec::new();
    for p in permutations(n) {
        for mask in 0..(1usize << n) {
            out.push(SignedPerm::new(p.clone(), (0..n).map(|a| mask & (1 << a) != 0).collect()));
        }
    }
    out
}

/// The `2ᴺ` coordinate reflections.
pub fn reflections(n: usize) -> Vec<SignedPerm> {
    (0..(1usize << n))
        .map(|mask| SignedPerm::new((0..n).collect(), (0..n).map(|a| mask & (1 << a) != 0).collect()))
        .collect()
}

/// A finite group of signed permutations with precomputed index maps.
#[derive(Clone, Debug)]
pub struct SymmetryGroup {
    grid: GridSpec,
    elements: Vec<SignedPerm>,
    maps: Vec<Vec<u32>>,
}

impl SymmetryGroup {
    pub fn new(grid: GridSpec, elements: Vec<SignedPerm>) -> Self {
        let maps = elements.iter().map(|g| g.index_map(&grid)).collect();
        Self { grid, elements, maps }
    }

    pub fn hyperoctahedral(grid: GridSpec) -> Self {
        Self::new(grid, hyperoctahedral(grid.dimension()))
    }

    /// Signed permutations that map the point set `positions` onto itself.
    pub fn stabilizer(grid: GridSpec, positions: &[Vec<f64>]) -> Self {
        let scale = positions
            .iter()
            .flat_map(|q| q.iter())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * scale;
        let n = grid.dimension();
        let mut img = vec![0.0; n];
        let elements = hyperoctahedral(n)
            .into_iter()
            .filter(|g| {
                positions.iter().all(|q| {
                    g.apply_point(q, &mut img);
                    positions.iter().any(|p| dist(p, &img) < tol)
                })
            })
            .collect();
        Self::new(grid, elements)
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[SignedPerm] {
        &self.elements
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `f ∘ g` for the `i`th element.
    pub fn act(&self, i: usize, f: &RealField) -> RealField {
        let src = f.samples();
        RealField::from_vec(self.grid, self.maps[i].iter().map(|&j| src[j as usize]).collect())
    }

    /// Group average `(1/|G|) Σ χ(g) f∘g`.
    pub fn project_with_character(&self, f: &RealField, chi: impl Fn(&SignedPerm) -> f64) -> RealField {
        assert!(f.grid().same_shape(&self.grid), "grid mismatch in symmetry projection");
        let src = f.samples();
        let mut out = vec![0.0; src.len()];
        for (g, map) in self.elements.iter().zip(&self.maps) {
            let c = chi(g);
            if c == 0.0 {
                continue;
            }
            for (o, &j) in out.iter_mut().zip(map) {
                *o += c * src[j as usize];
            }
        }
        let inv = 1.0 / self.elements.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        RealField::from_vec(self.grid, out)
    }

    /// Projection onto the invariant fields.
    pub fn project(&self, f: &RealField) -> RealField {
        self.project_with_character(f, |_| 1.0)
    }

    /// `max_g max_x |f(gx) − f(x)|`.
    pub fn defect(&self, f: &RealField) -> f64 {
        let src = f.samples();
        self.maps
            .iter()
            .map(|map| {
                map.iter()
                    .zip(src)
                    .map(|(&j, &v)| (src[j as usize] - v).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Orbits of `positions` under the group, each sorted, ordered by smallest member.
    pub fn orbits(&self, positions: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let n = self.grid.dimension();
        let scale = positions
            .iter()
            .flat_map(|q| q.iter())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let mut label = vec![usize::MAX; positions.len()];
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut img = vec![0.0; n];
        for j in 0..positions.len() {
            if label[j] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut orbit = Vec::new();
            for g in &self.elements {
                g.apply_point(&positions[j], &mut img);
                if let Some(t) = positions.iter().position(|p| dist(p, &img) < 1e-9 * scale) {
                    if label[t] == usize::MAX {
                        label[t] = id;
                        orbit.push(t);
                    }
                }
            }
            orbit.sort_unstable();
            out.push(orbit);
        }
        out
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Fields with prescribed parity under each coordinate reflection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParitySector {
    odd: Vec<bool>,
}

impl ParitySector {
    pub fn new(odd: Vec<bool>) -> Self {
        Self { odd }
    }

    pub fn odd_axes(&self) -> &[bool] {
        &self.odd
    }

    pub fn is_even(&self) -> bool {
        self.odd.iter().all(|o| !o)
    }

    /// Character of a reflection on this sector.
    pub fn character(&self, g: &SignedPerm) -> f64 {
        let flips = self.odd.iter().zip(g.flips()).filter(|(o, f)| **o && **f).count();
        if flips % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// All `2ᴺ` parity sectors, the fully even one first.
pub fn parity_sectors(n: usize) -> Vec<ParitySector> {
    (0..(1usize << n))
        .map(|mask| ParitySector::new((0..n).map(|a| mask & (1 << a) != 0).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_orders() {
        assert_eq!(hyperoctahedral(1).len(), 2);
        assert_eq!(hyperoctahedral(2).len(), 8);
        assert_eq!(hyperoctahedral(3).len(), 48);
    }

    #[test]
    fn projector_is_idempotent_and_kills_odd_parts() {
        let g = GridSpec::new(2, 4.0, 16).unwrap();
        let grp = SymmetryGroup::hyperoctahedral(g);
        let q = std::f64::consts::PI / 4.0;
        let f = RealField::from_fn(g, |x| (q * x[0]).sin() + 0.3 * x[0] * x[0] + 2.0 * (q * x[1]).sin() * (x[0] - 1.0));
        let p = grp.project(&f);
        assert!(grp.defect(&p) < 1e-14);
        assert!((&grp.project(&p) - &p).max_abs() < 1e-14);
        let odd = RealField::from_fn(g, |x| (q * x[0]).sin());
        assert!(grp.project(&odd).max_abs() < 1e-14);
    }

    #[test]
    fn ring_stabilizers() {
        let g = GridSpec::new(2, 20.0, 32).unwrap();
        let ring = |k: usize| -> Vec<Vec<f64>> {
            (0..k)
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                    vec![5.0 * t.cos(), 5.0 * t.sin()]
                })
                .collect()
        };
        assert_eq!(SymmetryGroup::stabilizer(g, &ring(8)).order(), 8);
        assert_eq!(SymmetryGroup::stabilizer(g, &ring(12)).order(), 8);
        assert_eq!(SymmetryGroup::stabilizer(g, &ring(6)).order(), 4);
        let orbits = SymmetryGroup::stabilizer(g, &ring(12)).orbits(&ring(12));
        assert_eq!(orbits.len(), 2);
        assert_eq!(orbits[0], vec![0, 3, 6, 9]);
        let orbits6 = SymmetryGroup::stabilizer(g, &ring(6)).orbits(&ring(6));
        assert_eq!(orbits6, vec![vec![0, 3], vec![1, 2, 4, 5]]);
    }

    #[test]
    fn parity_sector_projection() {
        let g = GridSpec::new(2, 4.0, 16).unwrap();
        let grp = SymmetryGroup::new(g, reflections(2));
        let q = std::f64::consts::PI / 4.0;
        let f = RealField::from_fn(g, |x| (q * x[0]).sin() * (1.0 + (q * x[1]).cos()) + (q * x[1]).sin());
        let sectors = parity_sectors(2);
        let parts: Vec<RealField> = sectors
            .iter()
            .map(|s| grp.project_with_character(&f, |e| s.character(e)))
            .collect();
        let mut sum = RealField::zeros(g);
        for p in &parts {
            sum.axpy(1.0, p);
        }
        assert!((&sum - &f).max_abs() < 1e-12);
        assert!(parts[0].max_abs() < 1e-14);
    }
}
