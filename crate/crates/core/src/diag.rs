//! Hamiltonian matrices in product bases and their lowest eigenpairs.
//!
//! Bases: oscillator functions, box sine functions, or a product of the two.
//! Polynomial potentials in oscillator axes use exact ladder-operator matrix
//! elements (banded in 1D); other potentials go through Gauss quadrature or,
//! for the 2D sine basis, a cosine transform of the sampled potential.
//! Dense matrices are diagonalized with nalgebra; banded ones are reduced to
//! tridiagonal form by Givens rotations and finished with implicit QL.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D, WaveFunction};
use crate::potentials::PotentialSpec;
use crate::specfun::oscillator_functions;
use crate::spectrum::{Method, SpectrumLevel, SpectrumResult};

/// Allowed deviation of the quadrature Gram matrix from the identity.
pub const GRAM_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Tridiagonal and banded eigensolvers

/// Ascending eigenvalues with optional eigenvectors.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// `vectors[i]` belongs to `values[i]`.
    pub vectors: Option<Vec<Vec<f64>>>,
}

/// Implicit QL on a symmetric tridiagonal matrix.
///
/// `d` is the diagonal, `e[i]` couples `i` and `i+1` (`e.len() >= n-1`).
/// When `rows` is given, each row is a vector that gets rotated along with
/// the iteration; start from the identity to get eigenvectors.
pub fn tridiagonal_ql(d: &[f64], e: &[f64], mut rows: Option<&mut Vec<Vec<f64>>>) -> Result<Vec<f64>> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = (0..n).map(|i| if i + 1 < n { e[i] } else { 0.0 }).collect();
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Numerical(format!("QL iteration did not converge at index {l}")));
                }
                let g = d[l];
                let p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                let mut p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    let r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = rows.as_deref_mut() {
                        let (lo, hi) = v.split_at_mut(i + 1);
                        let (vi, vj) = (&mut lo[i], &mut hi[0]);
                        for (a, b) in vi.iter_mut().zip(vj.iter_mut()) {
                            let h = *b;
                            *b = s * *a + c * h;
                            *a = c * *a - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(d)
}

fn sorted(values: Vec<f64>, vectors: Option<Vec<Vec<f64>>>) -> Eigen {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Eigen {
        values: idx.iter().map(|&i| values[i]).collect(),
        vectors: vectors.map(|v| idx.iter().map(|&i| v[i].clone()).collect()),
    }
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        q = d[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` lowest eigenvalues of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_lowest(d: &[f64], e: &[f64], k: usize) -> Vec<f64> {
    let n = d.len();
    let k = k.min(n);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let mut out = Vec::with_capacity(k);
    let mut left = lo;
    for j in 0..k {
        let (mut a, mut b) = (left, hi);
        while b - a > 2.0 * f64::EPSILON * a.abs().max(b.abs()) + f64::MIN_POSITIVE {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(d, e, mid) > j {
                b = mid;
            } else {
                a = mid;
            }
        }
        let v = 0.5 * (a + b);
        out.push(v);
        left = a;
    }
    out
}

/// Symmetric band matrix, lower storage, with room for one bulge diagonal.
#[derive(Clone, Debug)]
struct BandWork {
    n: usize,
    /// Stored half-width (band + 1).
    w: usize,
    data: Vec<f64>,
}

impl BandWork {
    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.w {
            0.0
        } else {
            self.data[i * (self.w + 1) + i - j]
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.w);
        self.data[i * (self.w + 1) + i - j] = v;
    }

    /// Rotate rows/columns `p` and `p+1` so that entry `(p+1, col)` vanishes.
    fn annihilate(&mut self, p: usize, col: usize, acc: Option<&mut Vec<Vec<f64>>>) {
        let q = p + 1;
        let ap = self.get(p, col);
        let aq = self.get(q, col);
        if aq == 0.0 {
            return;
        }
        let r = ap.hypot(aq);
        let (c, s) = (ap / r, aq / r);
        let lo = q.saturating_sub(self.w);
        let hi = (p + self.w).min(self.n - 1);
        for k in lo..=hi {
            if k == p || k == q {
                continue;
            }
            let akp = self.get(k, p);
            let akq = self.get(k, q);
            if akp == 0.0 && akq == 0.0 {
                continue;
            }
            self.set(k, p, c * akp + s * akq);
            self.set(k, q, -s * akp + c * akq);
        }
        let (app, aqq, apq) = (self.get(p, p), self.get(q, q), self.get(p, q));
        self.set(p, p, c * c * app + 2.0 * c * s * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * c * s * apq + c * c * aqq);
        self.set(p, q, (c * c - s * s) * apq + c * s * (aqq - app));
        self.set(q, col, 0.0);
        if let Some(rows) = acc {
            let (lo, hi) = rows.split_at_mut(q);
            let (vp, vq) = (&mut lo[p], &mut hi[0]);
            for (a, b) in vp.iter_mut().zip(vq.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = c * x + s * y;
                *b = -s * x + c * y;
            }
        }
    }
}

/// Eigenpairs of a symmetric band matrix (half-bandwidth `bw`, lower storage
/// `band[i*(bw+1) + (i-j)]`).
pub fn band_eigen(n: usize, bw: usize, band: &[f64], vectors: bool) -> Result<Eigen> {
    let w = bw + 1;
    let mut work = BandWork { n, w, data: vec![0.0; n * (w + 1)] };
    for i in 0..n {
        for k in 0..=bw.min(i) {
            work.set(i, i - k, band[i * (bw + 1) + k]);
        }
    }
    let mut acc = vectors.then(|| identity_rows(n));
    if bw > 1 {
        for j in 0..n.saturating_sub(2) {
            for k in (2..=bw.min(n - 1 - j)).rev() {
                let p = j + k - 1;
                work.annihilate(p, j, acc.as_mut());
                // chase the bulge created at (p+1+bw, p)
                let mut col = p;
                let mut r = p + 1 + bw;
                while r < n {
                    work.annihilate(r - 1, col, acc.as_mut());
                    col = r - 1;
                    r += bw;
                }
            }
        }
    }
    let d: Vec<f64> = (0..n).map(|i| work.get(i, i)).collect();
    let e: Vec<f64> = (0..n.saturating_sub(1)).map(|i| work.get(i + 1, i)).collect();
    let values = tridiagonal_ql(&d, &e, acc.as_mut())?;
    Ok(sorted(values, acc))
}

fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect()
}

/// Eigenpairs of a dense symmetric matrix (row-major).
pub fn dense_eigen(n: usize, a: &[f64], vectors: bool) -> Result<Eigen> {
    let m = DMatrix::from_row_slice(n, n, a);
    if !vectors {
        let vals = m.symmetric_eigenvalues();
        return Ok(sorted(vals.iter().copied().collect(), None));
    }
    let eig = m.symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let vecs: Vec<Vec<f64>> = (0..n).map(|j| eig.eigenvectors.column(j).iter().copied().collect()).collect();
    Ok(sorted(vals, Some(vecs)))
}

// ---------------------------------------------------------------------------
// Hamiltonian matrices

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    /// Lower band, `data[i*(bw+1) + (i-j)]`.
    Banded { bw: usize, data: Vec<f64> },
}

/// Real symmetric Hamiltonian matrix in some basis.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    n: usize,
    storage: Storage,
}

impl HamiltonianMatrix {
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::domain(format!("dense matrix needs {} entries, got {}", n * n, data.len())));
        }
        Ok(Self { n, storage: Storage::Dense(data) })
    }

    pub fn from_band(n: usize, bw: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * (bw + 1) {
            return Err(Error::domain("band storage has the wrong length"));
        }
        Ok(Self { n, storage: Storage::Banded { bw, data } })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn is_banded(&self) -> bool {
        matches!(self.storage, Storage::Banded { .. })
    }

    /// Structural half-bandwidth; `n-1` for dense storage.
    pub fn bandwidth(&self) -> usize {
        match &self.storage {
            Storage::Dense(_) => self.n.saturating_sub(1),
            Storage::Banded { bw, .. } => *bw,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a[i * self.n + j],
            Storage::Banded { bw, data } => {
                let (i, j) = if i >= j { (i, j) } else { (j, i) };
                if i - j > *bw {
                    0.0
                } else {
                    data[i * (bw + 1) + i - j]
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Banded { .. } => {
                let n = self.n;
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = self.get(i, j);
                    }
                }
                out
            }
        }
    }

    /// Largest |H_ij − H_ji|.
    pub fn asymmetry(&self) -> f64 {
        match &self.storage {
            Storage::Banded { .. } => 0.0,
            Storage::Dense(a) => {
                let n = self.n;
                let mut m = 0.0f64;
                for i in 0..n {
                    for j in 0..i {
                        m = m.max((a[i * n + j] - a[j * n + i]).abs());
                    }
                }
                m
            }
        }
    }

    fn norm_bound(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let bw = self.bandwidth();
                let lo = i.saturating_sub(bw);
                let hi = (i + bw).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn eigen(&self, vectors: bool) -> Result<Eigen> {
        match &self.storage {
            Storage::Dense(a) => dense_eigen(self.n, a, vectors),
            Storage::Banded { bw, data } => band_eigen(self.n, *bw, data, vectors),
        }
    }

    /// Lowest `n_levels` eigenvalues (and coefficient vectors).
    pub fn eigen_lowest(&self, n_levels: usize, vectors: bool) -> Result<SpectrumResult> {
        if self.n == 0 {
            return Err(Error::domain("empty matrix"));
        }
        let eig = self.eigen(vectors)?;
        let k = n_levels.min(self.n);
        let method = if self.is_banded() { Method::BandedDiag } else { Method::DenseDiag };
        let unc = self.n as f64 * f64::EPSILON * self.norm_bound();
        let mut out = SpectrumResult::from_energies(&eig.values[..k], unc, method);
        if n_levels > self.n {
            out.diagnostics.push(format!("requested {n_levels} levels, basis has {}", self.n));
        }
        out.vectors = eig.vectors.map(|mut v| {
            v.truncate(k);
            v
        });
        Ok(out)
    }

    /// Dense dump: u64 dimension, then row-major little-endian f64.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.n as u64).to_le_bytes())?;
        for v in self.to_dense() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Bases

/// One factor of a product basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    /// Eigenfunctions of `−ħ²/2 d² + ½ω²(x−c)²`, index from 0.
    Oscillator { omega: f64, center: f64 },
    /// `a^{-1/2} sin(πk(x−c+a)/2a)` on `|x−c| ≤ a`, index from 1.
    Sine { half_width: f64, center: f64 },
}

impl Axis {
    fn first_index(&self) -> usize {
        match self {
            Axis::Oscillator { .. } => 0,
            Axis::Sine { .. } => 1,
        }
    }

    /// Kinetic (plus, for oscillators, harmonic) reference energy of index `k`.
    pub fn level_energy(&self, k: usize, hbar: f64) -> f64 {
        match *self {
            Axis::Oscillator { omega, .. } => hbar * omega * (k as f64 + 0.5),
            Axis::Sine { half_width, .. } => {
                let q = PI * k as f64 / (2.0 * half_width);
                0.5 * hbar * hbar * q * q
            }
        }
    }

    /// Kinetic matrix `−ħ²/2 d²` on indices `first..first+n`.
    fn kinetic(&self, n: usize, hbar: f64) -> Vec<f64> {
        let mut t = vec![0.0; n * n];
        match *self {
            Axis::Oscillator { omega, .. } => {
                let s = 0.5 * hbar * omega;
                for i in 0..n {
                    t[i * n + i] = s * (2 * i + 1) as f64 / 2.0;
                    if i + 2 < n {
                        let v = -s * (((i + 1) * (i + 2)) as f64).sqrt() / 2.0;
                        t[i * n + i + 2] = v;
                        t[(i + 2) * n + i] = v;
                    }
                }
            }
            Axis::Sine { .. } => {
                for i in 0..n {
                    t[i * n + i] = self.level_energy(i + 1, hbar);
                }
            }
        }
        t
    }

    fn length(&self, hbar: f64) -> f64 {
        match *self {
            Axis::Oscillator { omega, .. } => (hbar / omega).sqrt(),
            Axis::Sine { half_width, .. } => half_width,
        }
    }

    /// Values of the basis functions with indices `first..first+n` at `x`.
    pub fn values(&self, n: usize, x: f64, hbar: f64) -> Vec<f64> {
        match *self {
            Axis::Oscillator { center, .. } => {
                if n == 0 {
                    return Vec::new();
                }
                let l = self.length(hbar);
                let mut v = oscillator_functions(n - 1, (x - center) / l);
                let s = l.powf(-0.5);
                v.iter_mut().for_each(|a| *a *= s);
                v
            }
            Axis::Sine { half_width: a, center } => {
                let t = x - center + a;
                if !(0.0..=2.0 * a).contains(&t) {
                    return vec![0.0; n];
                }
                let s = a.powf(-0.5);
                (1..=n).map(|k| s * (PI * k as f64 * t / (2.0 * a)).sin()).collect()
            }
        }
    }

    /// Matrices of `x^p`, `p = 0..=deg`, each `n×n` row-major.
    fn powers(&self, n: usize, deg: usize, hbar: f64) -> Result<Vec<Vec<f64>>> {
        match *self {
            Axis::Oscillator { center, .. } => Ok(oscillator_powers(n, deg, center, self.length(hbar))),
            Axis::Sine { .. } => {
                let q = self.quadrature(n, deg, hbar)?;
                let mut out = vec![vec![0.0; n * n]; deg + 1];
                for (x, w, vals) in &q {
                    let mut xp = 1.0;
                    for m in out.iter_mut() {
                        for i in 0..n {
                            let wi = w * xp * vals[i];
                            for j in 0..n {
                                m[i * n + j] += wi * vals[j];
                            }
                        }
                        xp *= x;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Quadrature nodes, weights and basis values; the Gram matrix it
    /// implies is checked against the identity.
    fn quadrature(&self, n: usize, extra: usize, hbar: f64) -> Result<Vec<(f64, f64, Vec<f64>)>> {
        let (nodes, weights) = match *self {
            Axis::Sine { half_width, center } => {
                let m = 2 * n + extra + 40;
                let (x, w) = gauss_legendre(m);
                (
                    x.iter().map(|t| center + half_width * t).collect::<Vec<_>>(),
                    w.iter().map(|w| w * half_width).collect::<Vec<_>>(),
                )
            }
            Axis::Oscillator { center, .. } => {
                let m = (2 * n).max(n + extra + 60);
                let l = self.length(hbar);
                let u = gauss_hermite_nodes(m)?;
                let w: Vec<f64> = u
                    .iter()
                    .map(|&ui| {
                        let s: f64 = oscillator_functions(m - 1, ui).iter().map(|v| v * v).sum();
                        l / s
                    })
                    .collect();
                (u.iter().map(|ui| center + l * ui).collect(), w)
            }
        };
        let q: Vec<(f64, f64, Vec<f64>)> =
            nodes.iter().zip(&weights).map(|(&x, &w)| (x, w, self.values(n, x, hbar))).collect();
        gram_check(&q, n)?;
        Ok(q)
    }
}

fn gram_check(q: &[(f64, f64, Vec<f64>)], n: usize) -> Result<()> {
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let g: f64 = q.iter().map(|(_, w, v)| w * v[i] * v[j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g - target).abs());
        }
    }
    if dev > GRAM_TOL {
        return Err(Error::Numerical(format!(
            "quadrature order insufficient: Gram deviation {dev:.3e}"
        )));
    }
    Ok(())
}

/// Exact `⟨j|(c + ℓ(a+a†)/√2)^p|i⟩` for `p ≤ deg`, by applying the
/// tridiagonal position matrix column by column in an enlarged space.
fn oscillator_powers(n: usize, deg: usize, c: f64, l: f64) -> Vec<Vec<f64>> {
    let ext = n + deg + 1;
    let off: Vec<f64> = (0..ext).map(|k| l * ((k + 1) as f64 / 2.0).sqrt()).collect();
    let mut out = vec![vec![0.0; n * n]; deg + 1];
    for (i, row) in out[0].chunks_mut(n).enumerate() {
        row[i] = 1.0;
    }
    let mut v = vec![0.0; ext];
    let mut next = vec![0.0; ext];
    for col in 0..n {
        v.iter_mut().for_each(|a| *a = 0.0);
        v[col] = 1.0;
        for p in 1..=deg {
            let lo = col.saturating_sub(p);
            let hi = (col + p).min(ext - 1);
            for k in lo..=hi {
                let mut s = c * v[k];
                if k > 0 {
                    s += off[k - 1] * v[k - 1];
                }
                if k + 1 < ext {
                    s += off[k] * v[k + 1];
                }
                next[k] = s;
            }
            for k in lo..=hi {
                v[k] = next[k];
            }
            let m = &mut out[p];
            for k in lo..=hi.min(n - 1) {
                m[k * n + col] = v[k];
            }
        }
    }
    out
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Hermite nodes (weight `e^{−u²}`) from the Jacobi matrix.
pub fn gauss_hermite_nodes(m: usize) -> Result<Vec<f64>> {
    let d = vec![0.0; m];
    let e: Vec<f64> = (1..m).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut u = tridiagonal_ql(&d, &e, None)?;
    u.sort_by(f64::total_cmp);
    Ok(u)
}

/// Basis families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BasisFamily {
    Ho1d { omega: f64 },
    Sine1d { half_width: f64 },
    PlaneWave2d { a_x: f64, a_y: f64 },
    HoProduct2d { omega_x: f64, omega_y: f64 },
    /// Sine functions in x, oscillator functions in y.
    Mixed2d { a: f64, omega: f64 },
}

impl BasisFamily {
    pub fn dims(&self) -> usize {
        match self {
            BasisFamily::Ho1d { .. } | BasisFamily::Sine1d { .. } => 1,
            _ => 2,
        }
    }
}

/// Family, size, effective ħ and the point the basis is centred on.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub n: usize,
    pub hbar: f64,
    pub center: (f64, f64),
}

impl BasisSpec {
    pub fn new(family: BasisFamily, n: usize) -> Self {
        Self { family, n, hbar: 1.0, center: (0.0, 0.0) }
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn with_center(mut self, x: f64, y: f64) -> Self {
        self.center = (x, y);
        self
    }

    pub fn axes(&self) -> Vec<Axis> {
        let (cx, cy) = self.center;
        match self.family {
            BasisFamily::Ho1d { omega } => vec![Axis::Oscillator { omega, center: cx }],
            BasisFamily::Sine1d { half_width } => vec![Axis::Sine { half_width, center: cx }],
            BasisFamily::PlaneWave2d { a_x, a_y } => vec![
                Axis::Sine { half_width: a_x, center: cx },
                Axis::Sine { half_width: a_y, center: cy },
            ],
            BasisFamily::HoProduct2d { omega_x, omega_y } => vec![
                Axis::Oscillator { omega: omega_x, center: cx },
                Axis::Oscillator { omega: omega_y, center: cy },
            ],
            BasisFamily::Mixed2d { a, omega } => vec![
                Axis::Sine { half_width: a, center: cx },
                Axis::Oscillator { omega, center: cy },
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("basis size must be positive"));
        }
        if !(self.hbar > 0.0) {
            return Err(Error::domain("ħ must be positive"));
        }
        let ok = match self.family {
            BasisFamily::Ho1d { omega } => omega > 0.0,
            BasisFamily::Sine1d { half_width } => half_width > 0.0,
            BasisFamily::PlaneWave2d { a_x, a_y } => a_x > 0.0 && a_y > 0.0,
            BasisFamily::HoProduct2d { omega_x, omega_y } => omega_x > 0.0 && omega_y > 0.0,
            BasisFamily::Mixed2d { a, omega } => a > 0.0 && omega > 0.0,
        };
        if !ok {
            return Err(Error::domain("basis scales must be positive"));
        }
        Ok(())
    }

    /// Index tuples of the retained functions, see [`truncation_order`].
    pub fn ordering(&self) -> Vec<Vec<usize>> {
        order_axes(&self.axes(), self.n, self.hbar)
    }

    /// Wave function on a 1D grid from basis coefficients.
    pub fn evaluate_1d(&self, coeffs: &[f64], grid: Grid1D) -> Result<WaveFunction> {
        let axes = self.axes();
        if axes.len() != 1 {
            return Err(Error::domain("basis is two-dimensional"));
        }
        let order = self.ordering();
        let count = axis_counts(&order, &axes)[0];
        let first = axes[0].first_index();
        let vals = grid
            .points()
            .iter()
            .map(|&x| {
                let v = axes[0].values(count, x, self.hbar);
                let s: f64 = order.iter().zip(coeffs).map(|(t, c)| c * v[t[0] - first]).sum();
                Complex64::new(s, 0.0)
            })
            .collect();
        WaveFunction::new(grid, vals)
    }

    /// Wave function on a 2D grid from basis coefficients.
    pub fn evaluate_2d(&self, coeffs: &[f64], grid: Grid2D) -> Result<WaveFunction> {
        let axes = self.axes();
        if axes.len() != 2 {
            return Err(Error::domain("basis is one-dimensional"));
        }
        let order = self.ordering();
        let counts = axis_counts(&order, &axes);
        let (fx, fy) = (axes[0].first_index(), axes[1].first_index());
        let vx: Vec<Vec<f64>> = grid.x.points().iter().map(|&x| axes[0].values(counts[0], x, self.hbar)).collect();
        let vy: Vec<Vec<f64>> = grid.y.points().iter().map(|&y| axes[1].values(counts[1], y, self.hbar)).collect();
        // C[i][j], contracted over i at each x first
        let (cx, cy) = (counts[0], counts[1]);
        let mut c = vec![0.0; cx * cy];
        for (t, &a) in order.iter().zip(coeffs) {
            c[(t[0] - fx) * cy + t[1] - fy] += a;
        }
        let partial: Vec<Vec<f64>> = vx
            .iter()
            .map(|ax| {
                let mut row = vec![0.0; cy];
                for (i, &phi) in ax.iter().enumerate() {
                    for (r, &cij) in row.iter_mut().zip(&c[i * cy..(i + 1) * cy]) {
                        *r += cij * phi;
                    }
                }
                row
            })
            .collect();
        let mut vals = Vec::with_capacity(grid.x.n_points * grid.y.n_points);
        for ay in &vy {
            for row in &partial {
                let s: f64 = row.iter().zip(ay).map(|(a, b)| a * b).sum();
                vals.push(Complex64::new(s, 0.0));
            }
        }
        WaveFunction::new(grid, vals)
    }
}

/// Per-axis number of functions needed to cover an ordering.
fn axis_counts(order: &[Vec<usize>], axes: &[Axis]) -> Vec<usize> {
    axes.iter()
        .enumerate()
        .map(|(d, a)| order.iter().map(|t| t[d]).max().map_or(0, |m| m + 1 - a.first_index()))
        .collect()
}

fn order_axes(axes: &[Axis], n: usize, hbar: f64) -> Vec<Vec<usize>> {
    let ranges: Vec<Vec<usize>> = axes.iter().map(|a| (a.first_index()..a.first_index() + n).collect()).collect();
    let mut cands: Vec<(f64, Vec<usize>)> = Vec::new();
    match axes.len() {
        1 => {
            for &i in &ranges[0] {
                cands.push((axes[0].level_energy(i, hbar), vec![i]));
            }
        }
        _ => {
            let ex: Vec<f64> = ranges[0].iter().map(|&i| axes[0].level_energy(i, hbar)).collect();
            let ey: Vec<f64> = ranges[1].iter().map(|&j| axes[1].level_energy(j, hbar)).collect();
            // the k² sums over the first k indices per axis bound the n-th lowest
            let k = ((n as f64).sqrt().ceil() as usize).min(n);
            let mut corner: Vec<f64> = ex[..k].iter().flat_map(|a| ey[..k].iter().map(move |b| a + b)).collect();
            corner.sort_by(f64::total_cmp);
            let bound = corner.get(n.saturating_sub(1)).copied().unwrap_or(f64::INFINITY);
            let bound = bound + 1e-9 * bound.abs().max(1e-300);
            for (a, &i) in ex.iter().zip(&ranges[0]) {
                for (b, &j) in ey.iter().zip(&ranges[1]) {
                    if a + b <= bound {
                        cands.push((a + b, vec![i, j]));
                    }
                }
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    // equal energies (to rounding) are ordered lexicographically
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < cands.len() && out.len() < n {
        let e0 = cands[start].0;
        let mut end = start + 1;
        while end < cands.len() && cands[end].0 - e0 <= 1e-12 * e0.abs().max(1e-300) {
            end += 1;
        }
        let mut group: Vec<Vec<usize>> = cands[start..end].iter().map(|c| c.1.clone()).collect();
        group.sort();
        out.extend(group);
        start = end;
    }
    out.truncate(n);
    out
}

/// The `n` lowest basis functions of a family by reference energy (ħ = 1);
/// ties are ordered lexicographically by index tuple.
pub fn truncation_order(family: BasisFamily, n: usize) -> Vec<Vec<usize>> {
    BasisSpec::new(family, n).ordering()
}

/// How potential matrix elements are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AssemblyRoute {
    /// Exact ladder algebra for polynomials in oscillator axes, quadrature or
    /// cosine transform otherwise.
    #[default]
    Auto,
    /// Always Gauss quadrature (1D and oscillator/mixed 2D).
    Quadrature,
}

/// Hamiltonian `−ħ²/2 ∇² + U` in the given basis.
pub fn assemble(potential: &PotentialSpec, basis: &BasisSpec) -> Result<HamiltonianMatrix> {
    assemble_with(potential, basis, AssemblyRoute::Auto)
}

pub fn assemble_with(potential: &PotentialSpec, basis: &BasisSpec, route: AssemblyRoute) -> Result<HamiltonianMatrix> {
    basis.validate()?;
    if potential.dims() != basis.family.dims() {
        return Err(Error::domain(format!(
            "{}D potential in a {}D basis",
            potential.dims(),
            basis.family.dims()
        )));
    }
    let axes = basis.axes();
    let order = basis.ordering();
    let hbar = basis.hbar;
    if axes.len() == 1 {
        assemble_1d(potential, &axes[0], order.len(), hbar, route)
    } else {
        assemble_2d(potential, &axes, &order, hbar, route)
    }
}

fn assemble_1d(potential: &PotentialSpec, axis: &Axis, n: usize, hbar: f64, route: AssemblyRoute) -> Result<HamiltonianMatrix> {
    let t = axis.kinetic(n, hbar);
    let poly = potential.polynomial_1d();
    if let (Axis::Oscillator { .. }, Some(coef), AssemblyRoute::Auto) = (axis, &poly, route) {
        let deg = coef.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        let bw = deg.max(2);
        let pw = axis.powers(n, deg, hbar)?;
        let mut data = vec![0.0; n * (bw + 1)];
        for i in 0..n {
            for k in 0..=bw.min(i) {
                let j = i - k;
                let mut v = t[i * n + j];
                for (p, c) in coef.iter().enumerate().take(deg + 1) {
                    v += c * pw[p][i * n + j];
                }
                data[i * (bw + 1) + k] = v;
            }
        }
        return HamiltonianMatrix::from_band(n, bw, data);
    }
    let q = axis.quadrature(n, poly.as_ref().map_or(0, |c| c.len()), hbar)?;
    let mut h = t;
    for (x, w, vals) in &q {
        let u = potential.value_1d(*x)?;
        for i in 0..n {
            let wi = w * u * vals[i];
            for j in 0..n {
                h[i * n + j] += wi * vals[j];
            }
        }
    }
    HamiltonianMatrix::from_dense(n, h)
}

fn assemble_2d(
    potential: &PotentialSpec,
    axes: &[Axis],
    order: &[Vec<usize>],
    hbar: f64,
    route: AssemblyRoute,
) -> Result<HamiltonianMatrix> {
    let n = order.len();
    let counts = axis_counts(order, axes);
    let firsts = [axes[0].first_index(), axes[1].first_index()];
    let tx = axes[0].kinetic(counts[0], hbar);
    let ty = axes[1].kinetic(counts[1], hbar);
    let loc: Vec<(usize, usize)> = order.iter().map(|t| (t[0] - firsts[0], t[1] - firsts[1])).collect();
    let mut h = vec![0.0; n * n];
    for (a, &(i, j)) in loc.iter().enumerate() {
        for (b, &(k, l)) in loc.iter().enumerate() {
            let mut v = 0.0;
            if j == l {
                v += tx[i * counts[0] + k];
            }
            if i == k {
                v += ty[j * counts[1] + l];
            }
            h[a * n + b] = v;
        }
    }
    let both_sine = axes.iter().all(|a| matches!(a, Axis::Sine { .. }));
    match (potential.polynomial_2d(), both_sine) {
        (_, true) => add_cosine_transform(potential, axes, &loc, &mut h)?,
        (Some(poly), false) => {
            let deg = poly.degree() as usize;
            let (px, py) = match route {
                AssemblyRoute::Auto => (axes[0].powers(counts[0], deg, hbar)?, axes[1].powers(counts[1], deg, hbar)?),
                AssemblyRoute::Quadrature => (
                    quadrature_powers(&axes[0], counts[0], deg, hbar)?,
                    quadrature_powers(&axes[1], counts[1], deg, hbar)?,
                ),
            };
            for (ex, ey, c) in poly.terms() {
                let (mx, my) = (&px[ex as usize], &py[ey as usize]);
                for (a, &(i, j)) in loc.iter().enumerate() {
                    for (b, &(k, l)) in loc.iter().enumerate() {
                        h[a * n + b] += c * mx[i * counts[0] + k] * my[j * counts[1] + l];
                    }
                }
            }
        }
        (None, false) => {
            return Err(Error::domain(
                "oscillator and mixed 2D bases need a polynomial potential",
            ))
        }
    }
    HamiltonianMatrix::from_dense(n, h)
}

/// `x^p` matrices from quadrature, oscillator axes included.
fn quadrature_powers(axis: &Axis, n: usize, deg: usize, hbar: f64) -> Result<Vec<Vec<f64>>> {
    let q = axis.quadrature(n, deg, hbar)?;
    let mut out = vec![vec![0.0; n * n]; deg + 1];
    for (x, w, vals) in &q {
        let mut xp = 1.0;
        for m in out.iter_mut() {
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] += w * xp * vals[i] * vals[j];
                }
            }
            xp *= x;
        }
    }
    Ok(out)
}

/// Potential matrix of a sine product basis from the 2D cosine transform of
/// `U` sampled at cell midpoints of an oversampled grid.
fn add_cosine_transform(potential: &PotentialSpec, axes: &[Axis], loc: &[(usize, usize)], h: &mut [f64]) -> Result<()> {
    let n = loc.len();
    let kmax = [
        loc.iter().map(|l| l.0 + 1).max().unwrap_or(1),
        loc.iter().map(|l| l.1 + 1).max().unwrap_or(1),
    ];
    let m: Vec<usize> = kmax.iter().map(|&k| (8 * k).max(128).next_power_of_two()).collect();
    let geom: Vec<(f64, f64)> = axes
        .iter()
        .map(|a| match *a {
            Axis::Sine { half_width, center } => (half_width, center),
            Axis::Oscillator { .. } => unreachable!(),
        })
        .collect();
    let (mx, my) = (m[0], m[1]);
    let mut u = vec![0.0; mx * my];
    for i in 0..mx {
        let x = geom[0].1 - geom[0].0 + (i as f64 + 0.5) * 2.0 * geom[0].0 / mx as f64;
        for j in 0..my {
            let y = geom[1].1 - geom[1].0 + (j as f64 + 0.5) * 2.0 * geom[1].0 / my as f64;
            u[i * my + j] = potential.value_2d(x, y)?;
        }
    }
    let c = dct2_2d(&u, mx, my);
    let norm = 1.0 / (mx * my) as f64;
    let cc = |p: usize, q: usize| c[p * my + q] * norm;
    for (a, &(i, j)) in loc.iter().enumerate() {
        let (k, l) = (i + 1, j + 1);
        for (b, &(i2, j2)) in loc.iter().enumerate() {
            let (k2, l2) = (i2 + 1, j2 + 1);
            let (dk, sk) = (k.abs_diff(k2), k + k2);
            let (dl, sl) = (l.abs_diff(l2), l + l2);
            h[a * n + b] += cc(dk, dl) - cc(sk, dl) - cc(dk, sl) + cc(sk, sl);
        }
    }
    Ok(())
}

/// Unnormalized DCT-II, `X_m = Σ x_j cos(πm(j+½)/M)`, via a length-2M FFT.
pub fn dct2(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(2 * m);
    let mut buf: Vec<Complex64> = x.iter().chain(x.iter().rev()).map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    (0..m)
        .map(|k| 0.5 * (Complex64::from_polar(1.0, -PI * k as f64 / (2.0 * m as f64)) * buf[k]).re)
        .collect()
}

fn dct2_2d(u: &[f64], mx: usize, my: usize) -> Vec<f64> {
    let mut rows: Vec<f64> = u.chunks(my).flat_map(dct2).collect();
    for j in 0..my {
        let col: Vec<f64> = (0..mx).map(|i| rows[i * my + j]).collect();
        for (i, v) in dct2(&col).into_iter().enumerate() {
            rows[i * my + j] = v;
        }
    }
    rows
}

/// Lowest eigenpairs of an assembled matrix.
pub fn eigen_lowest(h: &HamiltonianMatrix, n_levels: usize) -> Result<SpectrumResult> {
    h.eigen_lowest(n_levels, true)
}

// ---------------------------------------------------------------------------
// Finite-difference grid spectra

fn fd_lowest(u: &dyn Fn(f64) -> Result<f64>, x0: f64, h: f64, m: usize, k: usize, hbar: f64) -> Result<Vec<f64>> {
    let t = hbar * hbar / (h * h);
    let mut d = Vec::with_capacity(m);
    for j in 1..=m {
        d.push(t + u(x0 + j as f64 * h)?);
    }
    let e = vec![-0.5 * t; m.saturating_sub(1)];
    Ok(tridiagonal_lowest(&d, &e, k))
}

/// Lowest levels of `−ħ²/2 d² + U` with Dirichlet walls at the grid ends.
///
/// Three-point differences on spacings h, h/2, h/4 (h = grid spacing), two
/// Richardson passes; the error estimate is the spread of the first pass
/// divided by 15. Levels whose estimate exceeds `tol` are flagged.
pub fn grid_eigen_1d(potential: &PotentialSpec, grid: &Grid1D, n_levels: usize, hbar: f64, tol: f64) -> Result<SpectrumResult> {
    if potential.dims() != 1 {
        return Err(Error::domain("grid_eigen_1d needs a 1D potential"));
    }
    let n = grid.n_points;
    let length = grid.x_max - grid.x_min;
    let f = |x: f64| potential.value_1d(x);
    let mut e = Vec::new();
    for r in [1usize, 2, 4] {
        let m = r * n - 1;
        e.push(fd_lowest(&f, grid.x_min, length / (r * n) as f64, m, n_levels, hbar)?);
    }
    let k = e[0].len().min(n_levels);
    let mut out = SpectrumResult::default();
    for i in 0..k {
        let r12 = (4.0 * e[1][i] - e[0][i]) / 3.0;
        let r23 = (4.0 * e[2][i] - e[1][i]) / 3.0;
        let energy = (16.0 * r23 - r12) / 15.0;
        let err = (r23 - r12).abs() / 15.0;
        out.levels.push(SpectrumLevel { energy, uncertainty: err, method: Method::GridFd, flagged: err > tol });
    }
    let flagged = out.levels.iter().filter(|l| l.flagged).count();
    if flagged > 0 {
        out.diagnostics.push(format!("{flagged} levels exceed the error tolerance {tol:e}"));
    }
    Ok(out)
}
