// SPDX-License-Identifier: Apache-2.0

//! Periodic box discretization of ℝᴺ and the fields that live on it.
//!
//! The box is `[-L, L)ᴺ` sampled with `M` points per axis; sample `i` on an
//! axis sits at `-L + i·h` with `h = 2L/M`, so the origin is index `M/2`.
//! Samples are stored row-major with axis 0 varying slowest.

use std::ops::{Add, Mul, Sub};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and extent of the periodic computational box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dimension: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dimension: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("grid dimension must be at least 1".into()));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be even and at least 8, got {points_per_axis}"
            )));
        }
        Ok(Self {
            dimension,
            half_width,
            points_per_axis,
        })
    }

    /// Grid with spacing `spacing` whose half-width is at least `min_half_width`.
    /// The point count is rounded up to an even 7-smooth integer so transforms stay fast.
    pub fn with_spacing(dimension: usize, spacing: f64, min_half_width: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {spacing}")));
        }
        let needed = (2.0 * min_half_width / spacing).ceil() as usize;
        let m = smooth_even_at_least(needed.max(8));
        Self::new(dimension, 0.5 * m as f64 * spacing, m)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Total number of samples, `Mᴺ`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        -self.half_width + index as f64 * self.spacing()
    }

    /// Index of the origin along each axis.
    pub fn origin_index(&self) -> usize {
        self.points_per_axis / 2
    }

    /// Signed lattice index `n ∈ [-M/2, M/2)` of FFT bin `bin`.
    pub fn signed_bin(&self, bin: usize) -> i64 {
        let m = self.points_per_axis as i64;
        let b = bin as i64;
        if b < m / 2 {
            b
        } else {
            b - m
        }
    }

    /// Angular frequency `π n / L` of FFT bin `bin`.
    pub fn frequency(&self, bin: usize) -> f64 {
        std::f64::consts::PI * self.signed_bin(bin) as f64 / self.half_width
    }

    /// Stride of `axis` in the flat sample array.
    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.dimension - 1 - axis) as u32)
    }

    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        let m = self.points_per_axis;
        for a in (0..self.dimension).rev() {
            out[a] = flat % m;
            flat /= m;
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    /// Physical coordinates of sample `flat`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let m = self.points_per_axis;
        let mut rest = flat;
        for a in (0..self.dimension).rev() {
            out[a] = self.coordinate(rest % m);
            rest /= m;
        }
    }

    /// Minimum-image displacement `x − q` on the periodic box, written into
    /// `out`; returns its length. A component tied between `±L` is reported
    /// as 0 in `out` and as `L` in the length, which keeps sampled fields
    /// exactly equivariant under the lattice reflections.
    pub fn displacement(&self, x: &[f64], q: &[f64], out: &mut [f64]) -> f64 {
        let l = self.half_width;
        let period = 2.0 * l;
        let mut len2 = 0.0;
        for a in 0..x.len() {
            let mut y = x[a] - q[a];
            y -= period * (y / period).round();
            if (y.abs() - l).abs() <= 1e-12 * l {
                out[a] = 0.0;
                len2 += l * l;
            } else {
                out[a] = y;
                len2 += y * y;
            }
        }
        len2.sqrt()
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.dimension == other.dimension
            && self.points_per_axis == other.points_per_axis
            && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

fn smooth_even_at_least(n: usize) -> usize {
    let mut m = n + (n % 2);
    loop {
        let mut r = m;
        for f in [2, 3, 5, 7] {
            while r % f == 0 {
                r /= f;
            }
        }
        if r == 1 {
            return m;
        }
        m += 2;
    }
}

/// Order `s` of the fractional Laplacian; `s = 1` is the classical Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s <= 1.0 {
            Ok(Self(s))
        } else {
            Err(Error::InvalidParameter(format!("fractional order must lie in (0, 1], got {s}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Real samples on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: GridSpec,
    samples: Vec<f64>,
}

impl RealField {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples"));
        }
        Ok(Self { grid, samples })
    }

    /// Wraps samples that are known to be the right length and finite.
    pub(crate) fn from_vec(grid: GridSpec, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            samples: vec![value; grid.len()],
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dimension()];
        let samples = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoidal quadrature over the periodic box.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * self.samples.iter().sum::<f64>()
    }

    /// `∫ f g` by trapezoidal quadrature.
    pub fn inner(&self, other: &RealField) -> f64 {
        debug_assert!(self.grid.same_shape(&other.grid));
        self.grid.cell_volume() * dot(&self.samples, &other.samples)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RealField {
        Self::from_vec(self.grid, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> RealField {
        assert!(self.grid.same_shape(&other.grid), "grid mismatch in zip_map");
        Self::from_vec(
            self.grid,
            self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &RealField) {
        assert!(self.grid.same_shape(&other.grid), "grid mismatch in axpy");
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.samples.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn positive_part(&self) -> RealField {
        self.map(|v| v.max(0.0))
    }

    /// `(f₊)ᵖ`, the power used throughout for possibly-negative arguments.
    pub fn positive_pow(&self, p: f64) -> RealField {
        self.map(|v| pos_pow(v, p))
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn pos_pow(v: f64, p: f64) -> f64 {
    if v > 0.0 {
        if p == 2.0 {
            v * v
        } else if p == 3.0 {
            v * v * v
        } else {
            v.powf(p)
        }
    } else {
        0.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Add for &RealField {
    type Output = RealField;
    fn add(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &RealField {
    type Output = RealField;
    fn sub(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &RealField {
    type Output = RealField;
    fn mul(self, rhs: &RealField) -> RealField {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &RealField {
    type Output = RealField;
    fn mul(self, rhs: f64) -> RealField {
        self.map(|a| a * rhs)
    }
}

/// Elementwise operations of [`pointwise`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pointwise {
    Add,
    Sub,
    Mul,
    /// `f^e` on the positive part of `f`; the second operand is ignored.
    Pow(f64),
    /// `max(f, 0)`; the second operand is ignored.
    PositivePart,
}

/// Elementwise combination of two fields on the same grid.
pub fn pointwise(f: &RealField, g: &RealField, op: Pointwise) -> Result<RealField> {
    f.grid.check_same(&g.grid)?;
    Ok(match op {
        Pointwise::Add => f + g,
        Pointwise::Sub => f - g,
        Pointwise::Mul => f * g,
        Pointwise::Pow(e) => f.positive_pow(e),
        Pointwise::PositivePart => f.positive_part(),
    })
}

/// Complex coefficients on the full frequency lattice, in FFT bin order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub(crate) fn from_vec(grid: GridSpec, coefficients: Vec<Complex64>) -> Self {
        debug_assert_eq!(coefficients.len(), grid.len());
        Self { grid, coefficients }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// Largest deviation from `ĉ(-n) = conj(ĉ(n))`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let g = self.grid;
        let m = g.points_per_axis();
        let mut idx = vec![0; g.dimension()];
        let mut worst = 0.0f64;
        for (flat, c) in self.coefficients.iter().enumerate() {
            g.unflatten(flat, &mut idx);
            for i in idx.iter_mut() {
                *i = (m - *i) % m;
            }
            let partner = self.coefficients[g.flatten(&idx)];
            worst = worst.max((c - partner.conj()).norm());
        }
        worst
    }
}
