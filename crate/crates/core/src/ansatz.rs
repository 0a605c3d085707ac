// SPDX-License-Identifier: Apache-2.0

//! Spike rings, the radial potential, the multi-bump field `W` and the
//! weighted sup-norm used to measure everything built from them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pos_pow, FractionalOrder, GridSpec, RealField};
use crate::ground_state::RadialProfile;

/// `k` points on a circle of radius `r` in the `(x₁, x₂)` plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeRing {
    k: usize,
    r: f64,
    dimension: usize,
    positions: Vec<Vec<f64>>,
}

impl SpikeRing {
    pub fn new(k: usize, r: f64, dimension: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidParameter(format!("spike rings need N >= 2, got N = {dimension}")));
        }
        if k < 2 {
            return Err(Error::InvalidParameter(format!("a ring needs k >= 2 spikes, got {k}")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("ring radius must be positive, got {r}")));
        }
        let positions = (0..k)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / k as f64;
                let mut q = vec![0.0; dimension];
                q[0] = r * t.cos();
                q[1] = r * t.sin();
                q
            })
            .collect();
        Ok(Self { k, r, dimension, positions })
    }

    /// A single spike at `center`; `r` is `|center|`.
    pub fn single(center: Vec<f64>) -> Self {
        let r = center.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self {
            k: 1,
            r,
            dimension: center.len(),
            positions: vec![center],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    /// `|q₁ − q_j| = 2r sin((j−1)π/k)` with `j` counted from 1.
    pub fn pair_distance(&self, j: usize) -> f64 {
        2.0 * self.r * ((j as f64 - 1.0) * PI / self.k as f64).sin()
    }

    pub fn nearest_distance(&self) -> f64 {
        if self.k < 2 {
            f64::INFINITY
        } else {
            self.pair_distance(2)
        }
    }

    /// `Σ_{j≥2} |q₁ − q_j|^{-ℓ}`.
    pub fn circle_sum(&self, ell: f64) -> f64 {
        circle_sum(self.k, self.r, ell)
    }
}

/// `Σ_{j=2}^{k} |q₁ − q_j|^{-ℓ}` evaluated exactly.
pub fn circle_sum(k: usize, r: f64, ell: f64) -> f64 {
    let mut total = 0.0;
    for j in 2..=k {
        let d = 2.0 * r * ((j as f64 - 1.0) * PI / k as f64).sin();
        total += d.powf(-ell);
    }
    total
}

/// Radial perturbation added to the power-law potential.
pub type Remainder = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `V(|x|) = 1 + a/|x|ᵐ + remainder(|x|)`, with `|x|` capped below at `vcap`.
#[derive(Clone)]
pub struct PotentialSpec {
    pub a: f64,
    pub m: f64,
    pub vcap: f64,
    pub remainder: Option<Remainder>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("a", &self.a)
            .field("m", &self.m)
            .field("vcap", &self.vcap)
            .field("remainder", &self.remainder.is_some())
            .finish()
    }
}

impl PotentialSpec {
    pub fn new(a: f64, m: f64) -> Self {
        Self {
            a,
            m,
            vcap: 1.0,
            remainder: None,
        }
    }

    /// `V ≡ 1`.
    pub fn flat() -> Self {
        Self::new(0.0, 1.0)
    }

    pub fn with_cap(mut self, vcap: f64) -> Self {
        self.vcap = vcap;
        self
    }

    pub fn with_remainder(mut self, f: Remainder) -> Self {
        self.remainder = Some(f);
        self
    }

    pub fn value(&self, rho: f64) -> f64 {
        let rr = rho.max(self.vcap);
        let mut v = 1.0 + self.a * rr.powf(-self.m);
        if let Some(f) = &self.remainder {
            v += f(rho);
        }
        v
    }

    /// Rejects `m` outside the admissible window for `(N, s, p)`, naming the
    /// violated inequality.
    pub fn check_admissible(&self, dimension: usize, s: FractionalOrder, p: f64) -> Result<()> {
        let (lo, hi) = admissible_m_range(dimension, s, p);
        if !(self.a >= 0.0) {
            return Err(Error::Inadmissible(format!("a = {} must be nonnegative", self.a)));
        }
        if !(self.vcap > 0.0) {
            return Err(Error::Inadmissible(format!("potential cap radius must be positive, got {}", self.vcap)));
        }
        if !(self.m > lo) {
            return Err(Error::Inadmissible(format!(
                "m > max{{0, (N+2s)[1-(p-1)N-2ps+max{{s, p-N/2}}]}} = {lo} violated by m = {}",
                self.m
            )));
        }
        if !(self.m < hi) {
            return Err(Error::Inadmissible(format!("m < N+2s = {hi} violated by m = {}", self.m)));
        }
        Ok(())
    }
}

/// Open interval of admissible decay rates `m` for `(N, s, p)`.
pub fn admissible_m_range(dimension: usize, s: FractionalOrder, p: f64) -> (f64, f64) {
    let n = dimension as f64;
    let s = s.value();
    let inner = 1.0 - (p - 1.0) * n - 2.0 * p * s + s.max(p - n / 2.0);
    (((n + 2.0 * s) * inner).max(0.0), n + 2.0 * s)
}

/// Samples of `V` on the grid.
pub fn evaluate_potential(spec: &PotentialSpec, grid: &GridSpec) -> Result<RealField> {
    let v = RealField::from_fn(*grid, |x| spec.value(x.iter().map(|c| c * c).sum::<f64>().sqrt()));
    if !v.is_finite() {
        return Err(Error::NonFinite("potential"));
    }
    if v.min() <= 0.0 {
        return Err(Error::Inadmissible(format!("potential is not positive on the grid (min {:.3e})", v.min())));
    }
    Ok(v)
}

/// `μ = N/2 − m/(N+2s) + 1 + σ`.
pub fn weight_exponent(dimension: usize, s: FractionalOrder, m: f64, sigma: f64) -> f64 {
    let n = dimension as f64;
    n / 2.0 - m / (n + 2.0 * s.value()) + 1.0 + sigma
}

/// The weight `ρ(x) = Σ_j (1 + |x − q_j|)^{-μ}`.
#[derive(Clone, Debug)]
pub struct WeightRho {
    pub spikes: SpikeRing,
    pub mu: f64,
    pub sigma: f64,
}

impl WeightRho {
    pub fn new(spikes: SpikeRing, s: FractionalOrder, m: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        let n = spikes.dimension() as f64;
        let mu = weight_exponent(spikes.dimension(), s, m, sigma);
        if !(mu > n / 2.0 && mu < n + 2.0 * s.value()) {
            return Err(Error::InvalidParameter(format!(
                "weight exponent mu = {mu} must lie in (N/2, N+2s) = ({}, {})",
                n / 2.0,
                n + 2.0 * s.value()
            )));
        }
        Ok(Self { spikes, mu, sigma })
    }

    /// Weight with an explicit exponent.
    pub fn with_exponent(spikes: SpikeRing, mu: f64) -> Self {
        Self { spikes, mu, sigma: f64::NAN }
    }

    pub fn at(&self, x: &[f64]) -> f64 {
        self.spikes
            .positions()
            .iter()
            .map(|q| (1.0 + dist(x, q)).powf(-self.mu))
            .sum()
    }

    /// Samples of `ρ` using minimum-image distances.
    pub fn field(&self, grid: &GridSpec) -> RealField {
        let mut y = vec![0.0; grid.dimension()];
        RealField::from_fn(*grid, |x| {
            self.spikes
                .positions()
                .iter()
                .map(|q| (1.0 + grid.displacement(x, q, &mut y)).powf(-self.mu))
                .sum()
        })
    }

    /// Upper bound `2 + Σ_{j≥2}|q₁ − q_j|^{-μ}` for `max ρ`.
    pub fn bound(&self) -> f64 {
        2.0 + self.spikes.circle_sum(self.mu)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `‖f‖_* = max |f|/ρ` over the grid, with `ρ` given as samples.
pub fn star_norm_with(f: &RealField, rho: &RealField) -> f64 {
    f.samples()
        .iter()
        .zip(rho.samples())
        .map(|(v, r)| v.abs() / r)
        .fold(0.0, f64::max)
}

/// `‖f‖_* = max |f|/ρ` over the grid.
pub fn star_norm(f: &RealField, rho: &WeightRho) -> f64 {
    star_norm_with(f, &rho.field(f.grid()))
}

/// `[k^γ/C₀, C₀k^γ]` with `γ = (N+2s)/(N+2s−m)`.
pub fn admissible_radius_interval(k: usize, c0: f64, dimension: usize, s: FractionalOrder, m: f64) -> Result<(f64, f64)> {
    let ell = dimension as f64 + 2.0 * s.value();
    if !(m > 0.0 && m < ell) {
        return Err(Error::InvalidParameter(format!("m = {m} must lie in (0, N+2s) = (0, {ell})")));
    }
    if !(c0 > 1.0) {
        return Err(Error::InvalidParameter(format!("C0 must exceed 1, got {c0}")));
    }
    let centre = (k as f64).powf(radius_exponent(dimension, s, m));
    Ok((centre / c0, centre * c0))
}

/// `(N+2s)/(N+2s−m)`.
pub fn radius_exponent(dimension: usize, s: FractionalOrder, m: f64) -> f64 {
    let ell = dimension as f64 + 2.0 * s.value();
    ell / (ell - m)
}

/// Translated copies `w(x − q_j)` sampled on a grid.
#[derive(Clone, Debug)]
pub struct MultiBump {
    pub spikes: SpikeRing,
    /// `W = Σ_j w(· − q_j)`.
    pub total: RealField,
    /// `Σ_j w(· − q_j)ᵖ`
    pub sum_of_powers: RealField,
    pub p: f64,
}

/// `W(x) = Σ_j w(x − q_j)` at one point.
pub fn multibump_at(profile: &RadialProfile, spikes: &SpikeRing, x: &[f64]) -> f64 {
    spikes.positions().iter().map(|q| profile.value(dist(x, q))).sum()
}

/// Builds `W` by radial interpolation of the profile around each spike, with
/// minimum-image distances on the periodic box.
pub fn build_multibump(profile: &RadialProfile, spikes: &SpikeRing, grid: &GridSpec, p: f64) -> Result<MultiBump> {
    if grid.dimension() != spikes.dimension() {
        return Err(Error::GridMismatch(format!(
            "ring lives in N = {}, grid in N = {}",
            spikes.dimension(),
            grid.dimension()
        )));
    }
    let margin = 5.0 * profile.half_width();
    let l = grid.half_width();
    for q in spikes.positions() {
        let room = q.iter().map(|c| l - c.abs()).fold(f64::INFINITY, f64::min);
        if room < margin {
            return Err(Error::InvalidParameter(format!(
                "spike at distance {room:.3} from the box boundary; need at least {margin:.3}"
            )));
        }
    }
    let n = grid.dimension();
    let mut total = vec![0.0; grid.len()];
    let mut powers = vec![0.0; grid.len()];
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..grid.len() {
        grid.point(i, &mut x);
        let mut t = 0.0;
        let mut pw = 0.0;
        for q in spikes.positions() {
            let v = profile.value(grid.displacement(&x, q, &mut y));
            t += v;
            pw += pos_pow(v, p);
        }
        total[i] = t;
        powers[i] = pw;
    }
    Ok(MultiBump {
        spikes: spikes.clone(),
        total: RealField::new(*grid, total)?,
        sum_of_powers: RealField::new(*grid, powers)?,
        p,
    })
}

/// `E = (1 − V)W + Wᵖ − Σ_j W_jᵖ`.
pub fn error_field(bumps: &MultiBump, v: &RealField) -> RealField {
    let p = bumps.p;
    RealField::new(
        *bumps.total.grid(),
        bumps
            .total
            .samples()
            .iter()
            .zip(bumps.sum_of_powers.samples())
            .zip(v.samples())
            .map(|((&w, &sp), &vv)| (1.0 - vv) * w + pos_pow(w, p) - sp)
            .collect(),
    )
    .unwrap_or_else(|_| RealField::constant(*v.grid(), f64::NAN))
}

/// `‖E‖_*` against the three ingredients of its bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub star_norm: f64,
    /// `(k/r)^{min{N+2s, (N+2s)p − μ}}`
    pub interaction_term: f64,
    /// `r^{−(N+2s−μ)}`
    pub far_field_term: f64,
    /// `r^{−m}`
    pub potential_term: f64,
    /// `‖E‖_*·r^{m/2}`
    pub ratio: f64,
    pub bound_unit_constant: f64,
}

pub fn check_error_bound(
    e: &RealField,
    rho: &WeightRho,
    s: FractionalOrder,
    p: f64,
    m: f64,
) -> ErrorBoundReport {
    let spikes = &rho.spikes;
    let n = spikes.dimension() as f64;
    let ell = n + 2.0 * s.value();
    let r = spikes.radius();
    let k = spikes.k() as f64;
    let sn = star_norm(e, rho);
    let interaction = (k / r).powf(ell.min(ell * p - rho.mu));
    let far = r.powf(-(ell - rho.mu));
    let pot = r.powf(-m);
    ErrorBoundReport {
        star_norm: sn,
        interaction_term: interaction,
        far_field_term: far,
        potential_term: pot,
        ratio: sn * r.powf(m / 2.0),
        bound_unit_constant: interaction + far + pot,
    }
}

/// Bilinear sample of `f` at an arbitrary point of the `(x₁, x₂)` plane,
/// remaining coordinates taken at the grid index `rest`.
fn bilinear(f: &RealField, x0: f64, x1: f64, rest: &[usize]) -> f64 {
    let g = f.grid();
    let m = g.points_per_axis() as i64;
    let h = g.spacing();
    let l = g.half_width();
    let u = (x0 + l) / h;
    let v = (x1 + l) / h;
    let i0 = u.floor();
    let j0 = v.floor();
    let (fu, fv) = (u - i0, v - j0);
    let mut idx = vec![0usize; g.dimension()];
    idx[2..].copy_from_slice(rest);
    let mut at = |i: i64, j: i64| {
        idx[0] = i.rem_euclid(m) as usize;
        idx[1] = j.rem_euclid(m) as usize;
        f.samples()[g.flatten(&idx)]
    };
    let (i0, j0) = (i0 as i64, j0 as i64);
    (1.0 - fu) * (1.0 - fv) * at(i0, j0)
        + fu * (1.0 - fv) * at(i0 + 1, j0)
        + (1.0 - fu) * fv * at(i0, j0 + 1)
        + fu * fv * at(i0 + 1, j0 + 1)
}

/// Average of `f` over the dihedral group of order `2k` in the `(x₁, x₂)`
/// plane combined with the reflections `x_h ↦ −x_h`, `h ≥ 3`. Off-lattice
/// images are resampled bilinearly.
pub fn symmetrize(f: &RealField, k: usize) -> RealField {
    let g = *f.grid();
    assert!(g.dimension() >= 2 && k >= 1);
    let n = g.dimension();
    let m = g.points_per_axis();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let extra = n - 2;
    let flips = 1usize << extra;
    let out: Vec<f64> = (0..g.len())
        .map(|i| {
            g.unflatten(i, &mut idx);
            g.point(i, &mut x);
            let mut acc = 0.0;
            for mask in 0..flips {
                let rest: Vec<usize> = (0..extra)
                    .map(|h| if mask & (1 << h) != 0 { (m - idx[h + 2]) % m } else { idx[h + 2] })
                    .collect();
                for j in 0..k {
                    let t = 2.0 * PI * j as f64 / k as f64;
                    let (c, s) = (t.cos(), t.sin());
                    let a = c * x[0] - s * x[1];
                    let b = s * x[0] + c * x[1];
                    acc += bilinear(f, a, b, &rest);
                    acc += bilinear(f, a, -b, &rest);
                }
            }
            acc / (2 * k * flips) as f64
        })
        .collect();
    RealField::from_vec(g, out)
}

/// Largest change of the exact multi-bump under the ring symmetries, sampled
/// at the grid points.
pub fn ring_symmetry_defect(profile: &RadialProfile, spikes: &SpikeRing, grid: &GridSpec) -> f64 {
    let n = grid.dimension();
    let k = spikes.k();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let (c, s) = ((2.0 * PI / k as f64).cos(), (2.0 * PI / k as f64).sin());
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        grid.point(i, &mut x);
        let base = multibump_at(profile, spikes, &x);
        y.copy_from_slice(&x);
        y[0] = c * x[0] - s * x[1];
        y[1] = s * x[0] + c * x[1];
        worst = worst.max((multibump_at(profile, spikes, &y) - base).abs());
        for h in 1..n {
            y.copy_from_slice(&x);
            y[h] = -y[h];
            worst = worst.max((multibump_at(profile, spikes, &y) - base).abs());
        }
    }
    worst
}

/// Growth of `S(β) = Σ_{j≥2}|q₁ − q_j|^{-β}` in `k` along `r = c·k^γ`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RegimeSample {
    pub k: usize,
    pub sum: f64,
    /// Secant slope of `log S` (of `log(S/log k)` when `β = 1`) against `log k`
    /// between this and the previous `k`.
    pub measured_exponent: f64,
    pub model_exponent: f64,
}

/// Model growth exponent in `k` of the interaction sum: `β(1−γ)` for `β > 1`,
/// `1 − γ` times a logarithm for `β = 1`, `1 − βγ` for `β < 1`.
pub fn interaction_model_exponent(beta: f64, gamma: f64) -> f64 {
    if beta > 1.0 {
        beta * (1.0 - gamma)
    } else if beta == 1.0 {
        1.0 - gamma
    } else {
        1.0 - beta * gamma
    }
}

pub fn interaction_regimes(beta: f64, gamma: f64, prefactor: f64, ks: &[usize]) -> Vec<RegimeSample> {
    let mut out: Vec<RegimeSample> = Vec::new();
    let adj = |k: usize, s: f64| if beta == 1.0 { s / (k as f64).ln() } else { s };
    for (i, &k) in ks.iter().enumerate() {
        let r = prefactor * (k as f64).powf(gamma);
        let sum = circle_sum(k, r, beta);
        let measured = if i == 0 {
            f64::NAN
        } else {
            let (k0, s0) = (ks[i - 1], out[i - 1].sum);
            (adj(k, sum) / adj(k0, s0)).ln() / (k as f64 / k0 as f64).ln()
        };
        out.push(RegimeSample {
            k,
            sum,
            measured_exponent: measured,
            model_exponent: interaction_model_exponent(beta, gamma),
        });
    }
    out
}

/// `max_x Σ_j (1 + |x − q_j|)^{-α} / (1 + S(α))` over the grid.
pub fn overlap_constant(spikes: &SpikeRing, alpha: f64, grid: &GridSpec) -> f64 {
    let w = WeightRho::with_exponent(spikes.clone(), alpha);
    w.field(grid).max() / (1.0 + spikes.circle_sum(alpha))
}
