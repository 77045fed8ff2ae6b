//! Sparse band-operator algebra: composition, adjoints, commutators,
//! truncated operator norms, per-level decay profiles and K_q membership.
//!
//! Operators are stored column-sparse over a shared [`Basis`]; an
//! `antilinear` flag carries conjugation through composition so the real
//! structure J lives in the same type as everything else.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::Basis;
use crate::qcore::DeformationParams;

/// Absolute noise floor for decay fits. f64 cancellation leaves residual
/// entries around 1e-16 regardless of the underlying profile; levels below
/// this floor carry no slope information.
pub const DECAY_FLOOR: f64 = 1e-12;

#[derive(Clone)]
pub struct BandOperator {
    pub basis: Arc<Basis>,
    /// cols[j] = sorted (row, value) pairs of column j.
    cols: Vec<Vec<(usize, Complex64)>>,
    pub antilinear: bool,
    /// Accumulated l-bandwidth of the term structure.
    pub width: i64,
}

#[derive(Debug, thiserror::Error)]
pub enum OpError {
    #[error("operators live on different bases")]
    BasisMismatch,
    #[error("adjoint of an antilinear operator is not defined here")]
    Antilinear,
    #[error("not enough trusted levels for classification ({0} < 10)")]
    InsufficientLevels(usize),
}

impl BandOperator {
    pub fn zero(basis: Arc<Basis>, width: i64) -> Self {
        let dim = basis.dim;
        BandOperator { basis, cols: vec![Vec::new(); dim], antilinear: false, width }
    }

    pub fn identity(basis: Arc<Basis>) -> Self {
        let mut op = Self::zero(basis, 0);
        for j in 0..op.basis.dim {
            op.cols[j].push((j, Complex64::new(1.0, 0.0)));
        }
        op
    }

    /// Diagonal operator from a per-index rule.
    pub fn diagonal(basis: Arc<Basis>, f: impl Fn(usize) -> Complex64) -> Self {
        let mut op = Self::zero(basis, 0);
        for j in 0..op.basis.dim {
            let v = f(j);
            if v != Complex64::new(0.0, 0.0) {
                op.cols[j].push((j, v));
            }
        }
        op
    }

    /// Accumulate an entry (boundary closure: silently ignores None targets
    /// is the caller's job — this takes resolved indices).
    pub fn add_entry(&mut self, row: usize, col: usize, value: Complex64) {
        if value != Complex64::new(0.0, 0.0) {
            self.cols[col].push((row, value));
        }
    }

    /// Sort and merge duplicate entries; call once after building.
    pub fn finalize(&mut self) {
        for col in &mut self.cols {
            col.sort_by_key(|&(r, _)| r);
            let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(col.len());
            for &(r, v) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == r => last.1 += v,
                    _ => merged.push((r, v)),
                }
            }
            merged.retain(|&(_, v)| v != Complex64::new(0.0, 0.0));
            *col = merged;
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.cols[col]
            .iter()
            .find(|&&(r, _)| r == row)
            .map(|&(_, v)| v)
            .unwrap_or_default()
    }

    pub fn col(&self, j: usize) -> &[(usize, Complex64)] {
        &self.cols[j]
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for col in &mut out.cols {
            for e in col.iter_mut() {
                e.1 *= c;
            }
        }
        out
    }

    /// Entry-wise absolute value (used for backward-error scale operators).
    pub fn abs(&self) -> Self {
        let mut out = self.clone();
        out.antilinear = false;
        for col in &mut out.cols {
            for e in col.iter_mut() {
                e.1 = Complex64::new(e.1.norm(), 0.0);
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, OpError> {
        if self.basis != other.basis || self.antilinear != other.antilinear {
            return Err(OpError::BasisMismatch);
        }
        let mut out = self.clone();
        out.width = self.width.max(other.width);
        for j in 0..out.basis.dim {
            out.cols[j].extend_from_slice(&other.cols[j]);
        }
        out.finalize();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, OpError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// self ∘ other. If self is antilinear it conjugates the coefficients of
    /// other on the way through; antilinear flags compose by parity.
    pub fn compose(&self, other: &Self) -> Result<Self, OpError> {
        if self.basis != other.basis {
            return Err(OpError::BasisMismatch);
        }
        let mut out = Self::zero(self.basis.clone(), self.width + other.width);
        out.antilinear = self.antilinear != other.antilinear;
        for j in 0..out.basis.dim {
            let mut acc: Vec<(usize, Complex64)> = Vec::new();
            for &(k, b) in &other.cols[j] {
                let b = if self.antilinear { b.conj() } else { b };
                for &(i, a) in &self.cols[k] {
                    acc.push((i, a * b));
                }
            }
            out.cols[j] = acc;
        }
        out.finalize();
        Ok(out)
    }

    pub fn adjoint(&self) -> Result<Self, OpError> {
        if self.antilinear {
            return Err(OpError::Antilinear);
        }
        let mut out = Self::zero(self.basis.clone(), self.width);
        for j in 0..self.basis.dim {
            for &(i, v) in &self.cols[j] {
                out.cols[i].push((j, v.conj()));
            }
        }
        out.finalize();
        Ok(out)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self, OpError> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    pub fn anticommutator(&self, other: &Self) -> Result<Self, OpError> {
        self.compose(other)?.add(&other.compose(self)?)
    }

    /// y = A x (conjugating x first when antilinear).
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::default(); self.basis.dim];
        for j in 0..self.basis.dim {
            let xj = if self.antilinear { x[j].conj() } else { x[j] };
            if xj == Complex64::default() {
                continue;
            }
            for &(i, a) in &self.cols[j] {
                y[i] += a * xj;
            }
        }
        y
    }

    fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::default(); self.basis.dim];
        for j in 0..self.basis.dim {
            let mut acc = Complex64::default();
            for &(i, a) in &self.cols[j] {
                acc += a.conj() * x[i];
            }
            y[j] = acc;
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.cols
            .iter()
            .flat_map(|c| c.iter())
            .map(|&(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Max |entry| over the given columns (all rows).
    pub fn max_abs_on_cols(&self, cols: &[usize]) -> f64 {
        cols.iter()
            .flat_map(|&j| self.cols[j].iter())
            .map(|&(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Max |entry| with both row and column inside the mask.
    pub fn max_abs_on_window(&self, mask: &[bool]) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.basis.dim {
            if !mask[j] {
                continue;
            }
            for &(i, v) in &self.cols[j] {
                if mask[i] {
                    best = best.max(v.norm());
                }
            }
        }
        best
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.basis.dim).map(|j| self.entry(j, j)).sum()
    }

    /// Largest singular value of the operator restricted to `window`
    /// (rows and columns), by power iteration on A†A: deterministic seed
    /// 1/sqrt(dim) plus one seeded random restart, iterated until the
    /// Rayleigh quotient stabilizes to 1e-13 relative.
    pub fn operator_norm(&self, window: Option<&[usize]>) -> Result<f64, OpError> {
        let dim = self.basis.dim;
        let mask: Vec<bool> = match window {
            None => vec![true; dim],
            Some(w) => {
                let mut m = vec![false; dim];
                for &i in w {
                    m[i] = true;
                }
                m
            }
        };
        let active: usize = mask.iter().filter(|&&b| b).count();
        if active == 0 {
            return Ok(0.0);
        }
        let project = |v: &mut Vec<Complex64>| {
            for (i, keep) in mask.iter().enumerate() {
                if !keep {
                    v[i] = Complex64::default();
                }
            }
        };
        let step = |v: &[Complex64]| -> Vec<Complex64> {
            let mut w = self.apply(v);
            project(&mut w);
            let mut u = self.apply_adjoint(&w);
            project(&mut u);
            u
        };
        let norm2 = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

        let mut best = 0.0f64;
        for start in 0..2 {
            let mut v: Vec<Complex64> = if start == 0 {
                let seed = 1.0 / (active as f64).sqrt();
                mask.iter()
                    .map(|&keep| if keep { Complex64::new(seed, 0.0) } else { Complex64::default() })
                    .collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(0x706f_646c_6573);
                let mut v: Vec<Complex64> = (0..dim)
                    .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect();
                project(&mut v);
                let n = norm2(&v);
                if n > 0.0 {
                    for z in v.iter_mut() {
                        *z /= n;
                    }
                }
                v
            };
            // The top of A†A's spectrum can be a dense cluster whose gap
            // shrinks with the truncation size, so a fixed iteration budget
            // carries a cutoff-dependent bias that poisons cross-cutoff
            // stabilization comparisons. The Rayleigh quotient converges
            // geometrically with ratio (λ₂/λ₁)², which can be painfully close
            // to 1; Aitken Δ² on stride samples removes that mode, so we stop
            // once two successive extrapolants agree and return the
            // extrapolated value.
            let mut sigma = 0.0f64;
            let mut samples: Vec<f64> = Vec::new();
            let mut prev_extrap = f64::NEG_INFINITY;
            let mut prev_rho = f64::NEG_INFINITY;
            let mut flat = 0usize;
            const STRIDE: usize = 100;
            for it in 0..400_000usize {
                let u = step(&v);
                let n = norm2(&u);
                if n == 0.0 {
                    sigma = 0.0;
                    break;
                }
                let rho: f64 = v.iter().zip(&u).map(|(a, b)| (a.conj() * b).re).sum();
                sigma = rho.max(0.0).sqrt();
                if (rho - prev_rho).abs() <= 1e-15 * rho.abs().max(1e-300) {
                    flat += 1;
                    if flat >= 5 {
                        break;
                    }
                } else {
                    flat = 0;
                }
                prev_rho = rho;
                if it % STRIDE == STRIDE - 1 {
                    samples.push(rho);
                    let k = samples.len();
                    if k >= 3 {
                        let (r0, r1, r2) = (samples[k - 3], samples[k - 2], samples[k - 1]);
                        let denom = (r2 - r1) - (r1 - r0);
                        let extrap = if denom.abs() > 1e-300 {
                            r2 - (r2 - r1) * (r2 - r1) / denom
                        } else {
                            r2
                        };
                        let tol = 1e-13 * rho.abs().max(1e-300);
                        if (extrap - prev_extrap).abs() <= tol {
                            // accept the accelerated limit when it is a mild
                            // upward correction, otherwise keep the monotone
                            // Rayleigh estimate
                            if extrap >= rho && extrap - rho <= 1e-6 * rho.abs().max(1e-300) {
                                sigma = extrap.max(0.0).sqrt();
                            }
                            break;
                        }
                        prev_extrap = extrap;
                    }
                }
                v = u.iter().map(|z| z / n).collect();
            }
            best = best.max(sigma);
        }
        Ok(best)
    }

    /// Per-level maxima p_l over source (column) levels, and a least-squares
    /// slope of log p_l over the trusted range.
    pub fn decay_profile(&self, boundary_band: i64) -> DecayProfile {
        let basis = &self.basis;
        // collect distinct integer offsets from the global minimum level
        let lmin = basis.comps.iter().map(|c| c.l_min).min().unwrap();
        let ltop = basis.comps.iter().map(|c| c.l_top).max().unwrap();
        let nlev = ltop.floor_diff(lmin) + 1;
        let mut p = vec![0.0f64; nlev as usize];
        for j in 0..basis.dim {
            let lab = basis.label(j);
            let k = lab.l.floor_diff(lmin) as usize;
            for &(_, v) in &self.cols[j] {
                p[k] = p[k].max(v.norm());
            }
        }
        let levels: Vec<f64> = (0..nlev).map(|k| lmin.to_f64() + k as f64).collect();
        DecayProfile::fit(levels, p, lmin.to_f64(), ltop.to_f64(), boundary_band)
    }

    /// Plain-text dump: one "row col re im" line per stored entry.
    pub fn dump_matrix(&self) -> String {
        let mut out = String::new();
        for j in 0..self.basis.dim {
            for &(i, v) in &self.cols[j] {
                writeln!(out, "{} {} {:.17e} {:.17e}", i, j, v.re, v.im).unwrap();
            }
        }
        out
    }
}

/// Per-level decay data with a fitted exponential rate.
#[derive(Clone, Debug)]
pub struct DecayProfile {
    pub levels: Vec<f64>,
    pub p: Vec<f64>,
    /// Fitted slope of log p_l vs l over the trusted range, if enough levels.
    pub rate: Option<f64>,
    pub trusted: usize,
    /// True when every level beyond the bottom boundary band sits below the
    /// noise floor — the profile vanishes outright.
    pub vanishing: bool,
}

impl DecayProfile {
    fn fit(levels: Vec<f64>, p: Vec<f64>, lmin: f64, ltop: f64, band: i64) -> DecayProfile {
        let band = band as f64;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut any_signal_past_bottom = false;
        for (&l, &v) in levels.iter().zip(&p) {
            let in_range = l >= lmin + band && l <= ltop - band;
            if in_range && v > DECAY_FLOOR {
                xs.push(l);
                ys.push(v.ln());
            }
            if l >= lmin + band && v > DECAY_FLOOR {
                any_signal_past_bottom = true;
            }
        }
        let trusted = xs.len();
        let rate = if trusted >= 3 {
            // least squares slope
            let n = trusted as f64;
            let sx: f64 = xs.iter().sum();
            let sy: f64 = ys.iter().sum();
            let sxx: f64 = xs.iter().map(|x| x * x).sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
            let denom = n * sxx - sx * sx;
            if denom.abs() > 0.0 {
                Some((n * sxy - sx * sy) / denom)
            } else {
                None
            }
        } else {
            None
        };
        DecayProfile { levels, p, rate, trusted, vanishing: !any_signal_past_bottom }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum KqClass {
    InKq { rate: f64 },
    BoundedNotKq { rate: f64 },
    Growing { rate: f64 },
}

impl KqClass {
    pub fn is_in_kq(&self) -> bool {
        matches!(self, KqClass::InKq { .. })
    }
}

/// K_q membership from a fitted decay rate: in_Kq iff the rate clears
/// ln q with a 5% band; growing iff it clears zero by the same band.
///
/// A profile that vanishes outright (every level past the bottom boundary
/// band below the noise floor) is in K_q by any standard, even when too few
/// levels survive for a slope fit.
pub fn classify_kq(profile: &DecayProfile, params: &DeformationParams) -> Result<KqClass, OpError> {
    let lnq = params.q().ln();
    if profile.vanishing {
        return Ok(KqClass::InKq { rate: f64::NEG_INFINITY });
    }
    if profile.trusted < 10 {
        if let Some(rate) = profile.rate {
            // short but clean profiles still classify when far from the
            // margin; the same 5% band applies (a fit sitting exactly on
            // 2 ln q lands a hair above it in floating point)
            if rate <= 2.0 * lnq + 0.05 * lnq.abs() {
                return Ok(KqClass::InKq { rate });
            }
        }
        return Err(OpError::InsufficientLevels(profile.trusted));
    }
    let rate = profile.rate.expect("fit exists when trusted >= 10");
    let band = 0.05 * lnq.abs();
    Ok(if rate <= lnq + band {
        KqClass::InKq { rate }
    } else if rate > band {
        KqClass::Growing { rate }
    } else {
        KqClass::BoundedNotKq { rate }
    })
}
