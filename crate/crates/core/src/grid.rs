//! Uniform lattices, sampled wave functions and grid-level observables.
//!
//! Conventions: ħ = m = 1 unless a function takes an explicit `hbar`;
//! quadrature is the plain Riemann sum over the lattice (consistent with FFT
//! sampling); momenta follow the signed-index FFT convention
//! `k_j = 2π j' / (N dx)`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::potentials::PotentialSpec;

/// Smallest and largest allowed power-of-two exponent for a grid axis.
pub const MIN_EXPONENT: u32 = 4;
pub const MAX_EXPONENT: u32 = 24;

const NORMALIZATION_TOL: f64 = 1e-8;

/// Uniform periodic lattice `x_j = x_min + j dx`, `j < n_points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, exponent: u32) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::domain(format!(
                "grid interval [{x_min}, {x_max}] is empty or not finite"
            )));
        }
        if !(MIN_EXPONENT..=MAX_EXPONENT).contains(&exponent) {
            return Err(Error::domain(format!(
                "grid exponent {exponent} outside {MIN_EXPONENT}..={MAX_EXPONENT}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points: 1usize << exponent,
        })
    }

    /// Symmetric grid `[-half_width, half_width)`.
    pub fn symmetric(half_width: f64, exponent: u32) -> Result<Self> {
        Self::new(-half_width, half_width, exponent)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn point(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.point(j)).collect()
    }

    /// Angular wave numbers in FFT order.
    pub fn momenta(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = 2.0 * PI / (self.n_points as f64 * self.dx());
        (0..n)
            .map(|j| {
                let signed = if j < n / 2 { j } else { j - n };
                signed as f64 * dk
            })
            .collect()
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }
}

/// `make_grid(x_min, x_max, k)`: a grid with `2^k` nodes.
pub fn make_grid(x_min: f64, x_max: f64, exponent: u32) -> Result<Grid1D> {
    Grid1D::new(x_min, x_max, exponent)
}

/// Tensor product lattice; node `(ix, iy)` is stored at `iy * nx + ix`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Self {
        Self { x, y }
    }

    pub fn square(half_width: f64, exponent: u32) -> Result<Self> {
        let axis = Grid1D::symmetric(half_width, exponent)?;
        Ok(Self { x: axis, y: axis })
    }

    pub fn len(&self) -> usize {
        self.x.n_points * self.y.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.x.n_points + ix
    }

    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x.point(ix), self.y.point(iy))
    }

    pub fn cell_area(&self) -> f64 {
        self.x.dx() * self.y.dx()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    One(Grid1D),
    Two(Grid2D),
}

impl Grid {
    pub fn dims(&self) -> usize {
        match self {
            Grid::One(_) => 1,
            Grid::Two(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::One(g) => g.len(),
            Grid::Two(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        match self {
            Grid::One(g) => g.dx(),
            Grid::Two(g) => g.cell_area(),
        }
    }

    pub fn axes(&self) -> Vec<Grid1D> {
        match self {
            Grid::One(g) => vec![*g],
            Grid::Two(g) => vec![g.x, g.y],
        }
    }

    /// `|k|²/2` at every node in FFT order.
    pub fn kinetic_symbol(&self) -> Vec<f64> {
        match self {
            Grid::One(g) => g.momenta().into_iter().map(|k| 0.5 * k * k).collect(),
            Grid::Two(g) => {
                let kx = g.x.momenta();
                let ky = g.y.momenta();
                let mut out = Vec::with_capacity(g.len());
                for qy in &ky {
                    for qx in &kx {
                        out.push(0.5 * (qx * qx + qy * qy));
                    }
                }
                out
            }
        }
    }

    /// Largest kinetic energy representable on the lattice (ħ = 1).
    pub fn kinetic_max(&self) -> f64 {
        self.axes()
            .iter()
            .map(|a| 0.5 * a.k_max() * a.k_max())
            .sum()
    }

    /// Node coordinates, one `Vec` per node.
    pub fn coordinates(&self, index: usize) -> Vec<f64> {
        match self {
            Grid::One(g) => vec![g.point(index)],
            Grid::Two(g) => {
                let ix = index % g.x.n_points;
                let iy = index / g.x.n_points;
                vec![g.x.point(ix), g.y.point(iy)]
            }
        }
    }
}

impl From<Grid1D> for Grid {
    fn from(g: Grid1D) -> Self {
        Grid::One(g)
    }
}

impl From<Grid2D> for Grid {
    fn from(g: Grid2D) -> Self {
        Grid::Two(g)
    }
}

/// Complex amplitudes sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: impl Into<Grid>, values: Vec<Complex64>) -> Result<Self> {
        let grid = grid.into();
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: impl Into<Grid>, values: &[f64]) -> Result<Self> {
        Self::new(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn from_fn_1d(grid: Grid1D, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        Self {
            grid: Grid::One(grid),
            values,
        }
    }

    pub fn from_fn_2d(grid: Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..grid.y.n_points {
            let y = grid.y.point(iy);
            for ix in 0..grid.x.n_points {
                values.push(f(grid.x.point(ix), y));
            }
        }
        Self {
            grid: Grid::Two(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Scales to unit norm; fails on a zero vector.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize, norm = {n}")));
        }
        let inv = 1.0 / n;
        for v in &mut self.values {
            *v *= inv;
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n2 = self.norm_squared();
        if (n2 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm_sq: n2 });
        }
        Ok(())
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn rotate_phase(&mut self, theta: f64) {
        let p = Complex64::from_polar(1.0, theta);
        for v in &mut self.values {
            *v *= p;
        }
    }

    /// Momentum-space amplitudes `ψ̂(k_j) = Δx/√(2π) Σ_n ψ_n e^{-ik·x_n}` (up to a
    /// phase from `x_min`) and the momentum cell volume.
    pub fn to_momentum(&self) -> (Vec<Complex64>, f64) {
        let plan = FftPlan::new(&self.grid);
        let mut data = self.values.clone();
        plan.forward(&mut data);
        let mut scale = 1.0;
        let mut dk = 1.0;
        for axis in self.grid.axes() {
            scale *= axis.dx() / (2.0 * PI).sqrt();
            dk *= 2.0 * PI / (axis.n_points as f64 * axis.dx());
        }
        for v in &mut data {
            *v *= scale;
        }
        (data, dk)
    }

    pub fn momentum_norm_squared(&self) -> f64 {
        let (amps, dk) = self.to_momentum();
        amps.iter().map(|v| v.norm_sqr()).sum::<f64>() * dk
    }

    /// Real parts if every imaginary part is negligible relative to the largest
    /// amplitude, else `None`.
    pub fn real_parts(&self, rel_tol: f64) -> Option<Vec<f64>> {
        let max = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if self.values.iter().any(|v| v.im.abs() > rel_tol * max) {
            return None;
        }
        Some(self.values.iter().map(|v| v.re).collect())
    }

    /// Rotates the global phase so that the largest amplitude is real positive.
    pub fn realify(&mut self) {
        if let Some(big) = self
            .values
            .iter()
            .copied()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        {
            if big.norm() > 0.0 {
                self.rotate_phase(-big.arg());
            }
        }
    }

    /// CSV with one row per node: coordinates, then `re`, `im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self.grid {
            Grid::One(_) => writeln!(out, "x,re,im")?,
            Grid::Two(_) => writeln!(out, "x,y,re,im")?,
        }
        for (j, v) in self.values.iter().enumerate() {
            let coords = self.grid.coordinates(j);
            for c in coords {
                write!(out, "{c:.17e},")?;
            }
            writeln!(out, "{:.17e},{:.17e}", v.re, v.im)?;
        }
        Ok(())
    }

    /// Little-endian binary dump: `u32` dims, then per axis `u64` n_points,
    /// `f64` x_min, `f64` x_max; payload is interleaved `f64` re/im.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let axes = self.grid.axes();
        out.write_all(&(axes.len() as u32).to_le_bytes())?;
        for a in &axes {
            out.write_all(&(a.n_points as u64).to_le_bytes())?;
            out.write_all(&a.x_min.to_le_bytes())?;
            out.write_all(&a.x_max.to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        }
        fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
            Ok(f64::from_bits(read_u64(r)?))
        }

        let dims = read_u32(&mut input)?;
        if dims != 1 && dims != 2 {
            return Err(Error::Config(format!("unsupported dimension count {dims}")));
        }
        let mut axes = Vec::new();
        for _ in 0..dims {
            let n = read_u64(&mut input)? as usize;
            let x_min = read_f64(&mut input)?;
            let x_max = read_f64(&mut input)?;
            if !n.is_power_of_two() || !(x_max > x_min) {
                return Err(Error::Config(format!(
                    "invalid axis header n = {n}, [{x_min}, {x_max}]"
                )));
            }
            axes.push(Grid1D {
                x_min,
                x_max,
                n_points: n,
            });
        }
        let grid = if dims == 1 {
            Grid::One(axes[0])
        } else {
            Grid::Two(Grid2D::new(axes[0], axes[1]))
        };
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = read_f64(&mut input)?;
            let im = read_f64(&mut input)?;
            values.push(Complex64::new(re, im));
        }
        WaveFunction::new(grid, values)
    }
}

/// `⟨a|b⟩ = Σ conj(a_j) b_j · cell volume`.
pub fn inner_product(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(
            "inner product of wave functions on different grids".into(),
        ));
    }
    let sum: Complex64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(sum * a.grid.cell_volume())
}

/// Spectral application of `H = -ħ²/2 ∇² + U` to sampled amplitudes.
pub fn apply_hamiltonian(
    grid: &Grid,
    values: &[Complex64],
    potential: &[f64],
    hbar: f64,
) -> Vec<Complex64> {
    let plan = FftPlan::new(grid);
    let symbol = grid.kinetic_symbol();
    let mut kin = values.to_vec();
    plan.forward(&mut kin);
    let h2 = hbar * hbar;
    for (v, s) in kin.iter_mut().zip(&symbol) {
        *v *= h2 * s;
    }
    plan.inverse(&mut kin);
    kin.iter()
        .zip(values)
        .zip(potential)
        .map(|((k, v), u)| k + v * u)
        .collect()
}

/// `‖(H − E)ψ‖ / ‖ψ‖` with H applied spectrally.
pub fn residual_norm(psi: &WaveFunction, potential: &[f64], energy: f64, hbar: f64) -> f64 {
    let hpsi = apply_hamiltonian(&psi.grid, &psi.values, potential, hbar);
    let num: f64 = hpsi
        .iter()
        .zip(&psi.values)
        .map(|(h, v)| (h - v * energy).norm_sqr())
        .sum();
    let den: f64 = psi.values.iter().map(|v| v.norm_sqr()).sum();
    (num / den).sqrt()
}

/// `⟨ψ|H|ψ⟩` for sampled potential values; ψ must be normalized.
pub fn expectation_energy_sampled(psi: &WaveFunction, potential: &[f64], hbar: f64) -> Result<f64> {
    psi.check_normalized()?;
    if potential.len() != psi.values.len() {
        return Err(Error::GridMismatch(format!(
            "{} potential samples for {} nodes",
            potential.len(),
            psi.values.len()
        )));
    }
    let hpsi = apply_hamiltonian(&psi.grid, &psi.values, potential, hbar);
    let raw: Complex64 = psi
        .values
        .iter()
        .zip(&hpsi)
        .map(|(v, h)| v.conj() * h)
        .sum::<Complex64>()
        * psi.grid.cell_volume();
    if raw.im.abs() >= 1e-10 * raw.re.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "energy expectation has imaginary part {:e}",
            raw.im
        )));
    }
    Ok(raw.re)
}

/// `⟨ψ|H|ψ⟩` with ħ = m = 1.
pub fn expectation_energy(psi: &WaveFunction, potential: &PotentialSpec) -> Result<f64> {
    let samples = potential.sample(psi.grid())?;
    expectation_energy_sampled(psi, &samples, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::oscillator_function;
    use approx::assert_relative_eq;

    fn ho_state(grid: Grid1D, n: usize) -> WaveFunction {
        WaveFunction::from_fn_1d(grid, |x| Complex64::new(oscillator_function(n, x, 1.0), 0.0))
    }

    #[test]
    fn make_grid_examples() {
        let g = make_grid(-10.0, 10.0, 8).unwrap();
        assert_eq!(g.n_points, 256);
        assert_eq!(g.dx(), 0.078125);
        assert_eq!(make_grid(-10.0, 10.0, 4).unwrap().n_points, 16);
        assert!(matches!(make_grid(0.0, 0.0, 8), Err(Error::Domain(_))));
        assert!(make_grid(-1.0, 1.0, 3).is_err());
        assert!(make_grid(-1.0, 1.0, 25).is_err());
    }

    #[test]
    fn oscillator_states_orthonormal() {
        let g = make_grid(-12.0, 12.0, 10).unwrap();
        let p0 = ho_state(g, 0);
        let p1 = ho_state(g, 1);
        assert_relative_eq!(inner_product(&p0, &p0).unwrap().re, 1.0, epsilon = 1e-12);
        assert!(inner_product(&p0, &p1).unwrap().norm() < 1e-10);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = ho_state(make_grid(-12.0, 12.0, 10).unwrap(), 0);
        let b = ho_state(make_grid(-12.0, 12.0, 9).unwrap(), 0);
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn oscillator_energies() {
        let g = make_grid(-12.0, 12.0, 10).unwrap();
        let u = PotentialSpec::Harmonic { omega: 1.0 };
        assert_relative_eq!(expectation_energy(&ho_state(g, 0), &u).unwrap(), 0.5, epsilon = 1e-8);
        assert_relative_eq!(expectation_energy(&ho_state(g, 3), &u).unwrap(), 3.5, epsilon = 1e-8);
    }

    #[test]
    fn gaussian_energy_against_closed_form() {
        // ψ ∝ exp(-x²/(2σ²)): ⟨p²⟩/2 = 1/(4σ²), ⟨x²⟩/2 = σ²/4.
        let sigma = 2f64.sqrt();
        let oracle = 1.0 / (4.0 * sigma * sigma) + sigma * sigma / 4.0;
        assert_relative_eq!(oracle, 0.625, epsilon = 1e-15);
        let g = make_grid(-16.0, 16.0, 10).unwrap();
        let psi = WaveFunction::from_fn_1d(g, |x| Complex64::new((-x * x / (2.0 * sigma * sigma)).exp(), 0.0))
            .normalized()
            .unwrap();
        let e = expectation_energy(&psi, &PotentialSpec::Harmonic { omega: 1.0 }).unwrap();
        assert_relative_eq!(e, oracle, epsilon = 1e-6);
    }

    #[test]
    fn unnormalized_input_rejected() {
        let g = make_grid(-12.0, 12.0, 10).unwrap();
        let mut psi = ho_state(g, 0);
        for v in psi.values_mut() {
            *v *= 2.0;
        }
        let r = expectation_energy(&psi, &PotentialSpec::Harmonic { omega: 1.0 });
        assert!(matches!(r, Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn binary_dump_layout() {
        let g = make_grid(-1.0, 1.0, 4).unwrap();
        let psi = WaveFunction::from_fn_1d(g, |x| Complex64::new(x, -x));
        let mut buf = Vec::new();
        psi.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 24 + 16 * 16);
        assert_eq!(&buf[0..4], &1u32.to_le_bytes());
        assert_eq!(&buf[4..12], &16u64.to_le_bytes());
        assert_eq!(&buf[12..20], &(-1.0f64).to_le_bytes());
        let back = WaveFunction::read_binary(&buf[..]).unwrap();
        assert_eq!(back, psi);
    }

    #[test]
    fn csv_has_coordinates() {
        let g = Grid2D::square(1.0, 4).unwrap();
        let psi = WaveFunction::from_fn_2d(g, Complex64::new);
        let mut buf = Vec::new();
        psi.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 257);
        assert!(text.starts_with("x,y,re,im\n"));
    }

    proptest::proptest! {
        #[test]
        fn parseval(seed in proptest::collection::vec(-1.0f64..1.0, 512), two_d in proptest::bool::ANY) {
            let grid: Grid = if two_d {
                Grid2D::square(3.0, 4).unwrap().into()
            } else {
                Grid1D::new(-2.0, 5.0, 8).unwrap().into()
            };
            let vals: Vec<Complex64> =
                seed.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let psi = WaveFunction::new(grid, vals).unwrap();
            let a = psi.norm_squared();
            proptest::prop_assert!((psi.momentum_norm_squared() - a).abs() <= 1e-12 * a.max(1e-300));
        }

        #[test]
        fn real_input_has_conjugate_symmetric_transform(seed in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let g = Grid1D::symmetric(4.0, 6).unwrap();
            let psi = WaveFunction::from_real(g, &seed).unwrap();
            let (amps, _) = psi.to_momentum();
            let n = amps.len();
            for j in 0..n {
                let d = amps[(n - j) % n] - amps[j].conj();
                proptest::prop_assert!(d.norm() < 1e-12);
            }
        }

        #[test]
        fn energy_is_phase_invariant(theta in -6.3f64..6.3, w in 0.3f64..3.0) {
            let g = Grid1D::symmetric(8.0, 8).unwrap();
            let u: Vec<f64> = g.points().iter().map(|x| 0.5 * w * w * x * x + 0.1 * x.powi(3).sin()).collect();
            let psi = WaveFunction::from_fn_1d(g, |x| {
                Complex64::new((-(x - 0.3).powi(2)).exp(), 0.2 * x * (-x * x).exp())
            })
            .normalized()
            .unwrap();
            let e0 = expectation_energy_sampled(&psi, &u, 1.0).unwrap();
            let mut rotated = psi.clone();
            rotated.rotate_phase(theta);
            let e1 = expectation_energy_sampled(&rotated, &u, 1.0).unwrap();
            proptest::prop_assert!((e0 - e1).abs() < 1e-12 * e0.abs().max(1.0));
        }
    }
}
