// SPDX-License-Identifier: Apache-2.0

//! Fourier multipliers on the periodic box.
//!
//! Real fields go through a real-to-complex transform along the last axis and
//! complex transforms along the others, so every multiplier works on the
//! half spectrum of `M^(N-1)·(M/2+1)` coefficients.

use std::sync::{Arc, RwLock};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{FractionalOrder, GridSpec, RealField, SpectralField};

type SymbolCache = RwLock<Vec<(u64, Arc<Vec<f64>>)>>;

/// Transform plans and cached multiplier tables for one grid.
///
/// Plans and symbol tables are shared read-only; every call allocates its own
/// work buffers, so one context may be used from several threads.
pub struct Spectral {
    grid: GridSpec,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    xi2: Vec<f64>,
    symbols: SymbolCache,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let m = grid.points_per_axis();
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        let half = m / 2 + 1;
        let rows = grid.len() / m;
        let mut xi2 = vec![0.0; rows * half];
        let mut idx = vec![0; grid.dimension()];
        let row_grid_stride = m;
        for row in 0..rows {
            grid.unflatten(row * row_grid_stride, &mut idx);
            let base: f64 = idx[..grid.dimension() - 1]
                .iter()
                .map(|&i| grid.frequency(i).powi(2))
                .sum();
            for j in 0..half {
                let kj = std::f64::consts::PI * j as f64 / grid.half_width();
                xi2[row * half + j] = base + kj * kj;
            }
        }
        Self {
            grid,
            r2c: rp.plan_fft_forward(m),
            c2r: rp.plan_fft_inverse(m),
            fwd: cp.plan_fft_forward(m),
            inv: cp.plan_fft_inverse(m),
            xi2,
            symbols: RwLock::new(Vec::new()),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn half_len(&self) -> usize {
        self.grid.points_per_axis() / 2 + 1
    }

    /// `|ξ|²` on the half spectrum.
    pub fn xi_squared(&self) -> &[f64] {
        &self.xi2
    }

    /// `|ξ|^{2s}` on the half spectrum, cached per `s`.
    pub fn abs_symbol(&self, s: FractionalOrder) -> Arc<Vec<f64>> {
        let key = s.value().to_bits();
        if let Some((_, t)) = self.symbols.read().unwrap().iter().find(|(k, _)| *k == key) {
            return Arc::clone(t);
        }
        let sv = s.value();
        let table: Vec<f64> = self
            .xi2
            .iter()
            .map(|&k2| if k2 == 0.0 { 0.0 } else if sv == 1.0 { k2 } else { k2.powf(sv) })
            .collect();
        let table = Arc::new(table);
        let mut w = self.symbols.write().unwrap();
        if let Some((_, t)) = w.iter().find(|(k, _)| *k == key) {
            return Arc::clone(t);
        }
        w.push((key, Arc::clone(&table)));
        table
    }

    /// Passes a complex transform along every axis in `axes` of a row-major
    /// array whose last axis has length `last`.
    fn complex_passes(&self, data: &mut [Complex64], last: usize, axes: std::ops::Range<usize>, inverse: bool) {
        let m = self.grid.points_per_axis();
        let n = self.grid.dimension();
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for axis in axes {
            let stride = if axis == n - 1 {
                1
            } else {
                last * m.pow((n - 2 - axis) as u32)
            };
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * m;
            let mut buf = vec![Complex64::default(); block];
            for chunk in data.chunks_mut(block) {
                for off in 0..stride {
                    for i in 0..m {
                        buf[off * m + i] = chunk[off + i * stride];
                    }
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for off in 0..stride {
                    for i in 0..m {
                        chunk[off + i * stride] = buf[off * m + i];
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform onto the half spectrum.
    pub fn half_forward(&self, samples: &[f64]) -> Vec<Complex64> {
        let m = self.grid.points_per_axis();
        let h = self.half_len();
        let rows = samples.len() / m;
        let mut out = vec![Complex64::default(); rows * h];
        let mut input = vec![0.0; m];
        let mut scratch = self.r2c.make_scratch_vec();
        for (row, dst) in samples.chunks(m).zip(out.chunks_mut(h)) {
            input.copy_from_slice(row);
            self.r2c
                .process_with_scratch(&mut input, dst, &mut scratch)
                .expect("buffer lengths match the plan");
        }
        let n = self.grid.dimension();
        self.complex_passes(&mut out, h, 0..n - 1, false);
        out
    }

    /// Inverse of [`Self::half_forward`], including the `1/Mᴺ` normalization.
    pub fn half_inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        let m = self.grid.points_per_axis();
        let h = self.half_len();
        let n = self.grid.dimension();
        self.complex_passes(&mut spec, h, 0..n - 1, true);
        let norm = 1.0 / self.grid.len() as f64;
        let mut out = vec![0.0; self.grid.len()];
        let mut scratch = self.c2r.make_scratch_vec();
        for (src, dst) in spec.chunks_mut(h).zip(out.chunks_mut(m)) {
            src[0].im = 0.0;
            src[h - 1].im = 0.0;
            self.c2r
                .process_with_scratch(src, dst, &mut scratch)
                .expect("buffer lengths match the plan");
        }
        out.iter_mut().for_each(|v| *v *= norm);
        out
    }

    /// Applies a real multiplier given on the half spectrum.
    pub fn apply_symbol(&self, f: &RealField, symbol: &[f64]) -> RealField {
        assert!(f.grid().same_shape(&self.grid), "field grid differs from transform grid");
        let mut spec = self.half_forward(f.samples());
        for (c, &m) in spec.iter_mut().zip(symbol) {
            *c *= m;
        }
        RealField::from_vec(self.grid, self.half_inverse(spec))
    }

    /// Applies `symbol(|ξ|²)` computed on the fly.
    pub fn apply_radial(&self, f: &RealField, symbol: impl Fn(f64) -> f64) -> RealField {
        let table: Vec<f64> = self.xi2.iter().map(|&k2| symbol(k2)).collect();
        self.apply_symbol(f, &table)
    }

    pub fn forward_transform(&self, f: &RealField) -> Result<SpectralField> {
        self.grid.check_same(f.grid())?;
        if !f.is_finite() {
            return Err(Error::NonFinite("forward transform input"));
        }
        let mut data: Vec<Complex64> = f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let m = self.grid.points_per_axis();
        self.complex_passes(&mut data, m, 0..self.grid.dimension(), false);
        Ok(SpectralField::from_vec(self.grid, data))
    }

    /// Real part of the normalized inverse transform.
    pub fn inverse_transform(&self, c: &SpectralField) -> Result<RealField> {
        self.grid.check_same(c.grid())?;
        let mut data = c.coefficients().to_vec();
        let m = self.grid.points_per_axis();
        self.complex_passes(&mut data, m, 0..self.grid.dimension(), true);
        let norm = 1.0 / self.grid.len() as f64;
        Ok(RealField::from_vec(self.grid, data.iter().map(|z| z.re * norm).collect()))
    }

    /// Weight `w` with `∫f² = w·Σ|ĉ|²` for the unnormalized coefficients.
    pub fn parseval_weight(&self) -> f64 {
        self.grid.cell_volume() / self.grid.len() as f64
    }

    /// `(−Δ)ˢ f`.
    pub fn frac_laplacian(&self, f: &RealField, s: FractionalOrder) -> RealField {
        let sym = self.abs_symbol(s);
        self.apply_symbol(f, &sym)
    }

    /// `((−Δ)ˢ + mass)⁻¹ g`.
    pub fn resolvent(&self, g: &RealField, s: FractionalOrder, mass: f64) -> Result<RealField> {
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter(format!("resolvent mass must be positive, got {mass}")));
        }
        let sym = self.abs_symbol(s);
        let table: Vec<f64> = sym.iter().map(|&v| 1.0 / (v + mass)).collect();
        Ok(self.apply_symbol(g, &table))
    }

    /// Spectral derivative along `axis`; the Nyquist mode is dropped.
    pub fn derivative(&self, f: &RealField, axis: usize) -> RealField {
        assert!(axis < self.grid.dimension());
        let m = self.grid.points_per_axis();
        let h = self.half_len();
        let n = self.grid.dimension();
        let mut spec = self.half_forward(f.samples());
        let mut idx = vec![0; n];
        for (row, chunk) in spec.chunks_mut(h).enumerate() {
            self.grid.unflatten(row * m, &mut idx);
            for (j, c) in chunk.iter_mut().enumerate() {
                let (bin, k) = if axis == n - 1 {
                    (j, std::f64::consts::PI * j as f64 / self.grid.half_width())
                } else {
                    (idx[axis], self.grid.frequency(idx[axis]))
                };
                if bin == m / 2 {
                    *c = Complex64::default();
                } else {
                    *c *= Complex64::new(0.0, k);
                }
            }
        }
        RealField::from_vec(self.grid, self.half_inverse(spec))
    }

    pub fn gradient(&self, f: &RealField) -> Vec<RealField> {
        (0..self.grid.dimension()).map(|a| self.derivative(f, a)).collect()
    }

    /// `(f₊)ᵖ` formed on a grid refined by `pad` and projected back, which
    /// removes the aliasing of the pointwise power up to degree `pad + 1`.
    pub fn dealiased_power(&self, f: &RealField, p: f64, pad: usize) -> Result<RealField> {
        if pad <= 1 {
            return Ok(f.positive_pow(p));
        }
        let fine = GridSpec::new(self.grid.dimension(), self.grid.half_width(), self.grid.points_per_axis() * pad)?;
        let up = resample(&self.forward_transform(f)?, &fine);
        let fine_ctx = Spectral::new(fine);
        let powered = fine_ctx.inverse_transform(&up)?.positive_pow(p);
        let down = resample(&fine_ctx.forward_transform(&powered)?, &self.grid);
        self.inverse_transform(&down)
    }
}

/// Trigonometric interpolation between grids of equal extent; coefficients
/// are truncated or zero-padded and rescaled. The Nyquist coefficient is
/// split symmetrically when padding.
pub fn resample(c: &SpectralField, target: &GridSpec) -> SpectralField {
    let src = *c.grid();
    let n = src.dimension();
    let ms = src.points_per_axis();
    let mt = target.points_per_axis();
    let scale = target.len() as f64 / src.len() as f64;
    let mut out = vec![Complex64::default(); target.len()];
    let mut idx = vec![0usize; n];
    let mut tidx = vec![0usize; n];
    for (flat, &coef) in c.coefficients().iter().enumerate() {
        src.unflatten(flat, &mut idx);
        let mut weight = scale;
        let mut ok = true;
        let mut nyq = Vec::new();
        for a in 0..n {
            let k = src.signed_bin(idx[a]);
            if mt > ms && k == -(ms as i64) / 2 {
                weight *= 0.5;
                nyq.push(a);
            } else if mt < ms && k.unsigned_abs() as usize >= mt / 2 {
                ok = false;
                break;
            }
            tidx[a] = k.rem_euclid(mt as i64) as usize;
        }
        if !ok {
            continue;
        }
        // each Nyquist axis contributes to both ±M/2 in the larger grid
        let combos = 1usize << nyq.len();
        for mask in 0..combos {
            let mut t = tidx.clone();
            for (bit, &a) in nyq.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    t[a] = ms / 2;
                }
            }
            out[target.flatten(&t)] += coef * weight;
        }
    }
    SpectralField::from_vec(*target, out)
}

/// `(−Δ)ˢ f` with a one-off transform context.
pub fn frac_laplacian(f: &RealField, s: FractionalOrder) -> RealField {
    Spectral::new(*f.grid()).frac_laplacian(f, s)
}

/// `((−Δ)ˢ + mass)⁻¹ g` with a one-off transform context.
pub fn resolvent(g: &RealField, s: FractionalOrder, mass: f64) -> Result<RealField> {
    Spectral::new(*g.grid()).resolvent(g, s, mass)
}

pub fn forward_transform(f: &RealField) -> Result<SpectralField> {
    Spectral::new(*f.grid()).forward_transform(f)
}

pub fn inverse_transform(c: &SpectralField) -> Result<RealField> {
    Spectral::new(*c.grid()).inverse_transform(c)
}

pub fn integrate(f: &RealField) -> f64 {
    f.integrate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2(l: f64, m: usize) -> GridSpec {
        GridSpec::new(2, l, m).unwrap()
    }

    #[test]
    fn constant_has_single_coefficient() {
        let g = grid2(3.0, 16);
        let c = forward_transform(&RealField::constant(g, 1.0)).unwrap();
        assert!((c.coefficients()[0].re - 256.0).abs() < 1e-10);
        let rest = c.coefficients()[1..].iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(rest < 1e-10);
    }

    #[test]
    fn cosine_is_two_modes() {
        let g = grid2(PI, 16);
        let f = RealField::from_fn(g, |x| (2.0 * x[0] + 3.0 * x[1]).cos());
        let c = forward_transform(&f).unwrap();
        let big: Vec<usize> = c
            .coefficients()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 1e-8)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(big.len(), 2);
        assert!(c.conjugate_symmetry_defect() < 1e-10);
    }

    #[test]
    fn frac_laplacian_of_constant_and_mode() {
        let g = grid2(PI, 16);
        let s = FractionalOrder::new(0.3).unwrap();
        let ctx = Spectral::new(g);
        assert!(ctx.frac_laplacian(&RealField::constant(g, 2.5), s).max_abs() < 1e-12);
        let f = RealField::from_fn(g, |x| (2.0 * x[0] - 3.0 * x[1]).cos());
        let lam = 13f64.powf(0.3);
        let d = &ctx.frac_laplacian(&f, s) - &(&f * lam);
        assert!(d.max_abs() < 1e-12);
        let r = ctx.resolvent(&f, s, 0.7).unwrap();
        assert!((&r - &(&f * (1.0 / (lam + 0.7)))).max_abs() < 1e-13);
        assert!(ctx.resolvent(&f, s, 0.0).is_err());
    }

    #[test]
    fn classical_gaussian_laplacian() {
        let g = grid2(12.0, 256);
        let f = RealField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let lap = frac_laplacian(&f, FractionalOrder::new(1.0).unwrap());
        let exact = RealField::from_fn(g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (2.0 - r2) * (-r2 / 2.0).exp()
        });
        assert!((&lap - &exact).max_abs() < 1e-6);
    }

    #[test]
    fn gaussian_integral() {
        let g = grid2(12.0, 128);
        let f = RealField::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        assert!((integrate(&f) - PI).abs() < 1e-8);
    }

    #[test]
    fn derivative_of_mode() {
        let g = GridSpec::new(3, PI, 8).unwrap();
        let f = RealField::from_fn(g, |x| (x[0] + 2.0 * x[2]).sin());
        let ctx = Spectral::new(g);
        let d2 = ctx.derivative(&f, 2);
        let exact = RealField::from_fn(g, |x| 2.0 * (x[0] + 2.0 * x[2]).cos());
        assert!((&d2 - &exact).max_abs() < 1e-12);
        assert!(ctx.derivative(&f, 1).max_abs() < 1e-12);
    }

    #[test]
    fn dealiased_square_is_exact_for_band_limited_input() {
        let g = GridSpec::new(1, PI, 8).unwrap();
        let f = RealField::from_fn(g, |x| 2.0 + x[0].cos() + (3.0 * x[0]).cos());
        let ctx = Spectral::new(g);
        let sq = ctx.dealiased_power(&f, 2.0, 2).unwrap();
        // projection of f² onto |n| < 4: the cos 4x and cos 6x parts are dropped
        let exact = RealField::from_fn(g, |x| {
            5.0 + 4.0 * x[0].cos() + 1.5 * (2.0 * x[0]).cos() + 4.0 * (3.0 * x[0]).cos()
        });
        assert!((&sq - &exact).max_abs() < 1e-12, "{:?}", (&sq - &exact).max_abs());
    }
}
