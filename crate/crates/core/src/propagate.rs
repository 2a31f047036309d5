//! Split-operator time evolution, autocorrelation spectra and eigenfunction
//! reconstruction by time-Fourier projection.
//!
//! One step is `e^{−iUΔt/2ħ} e^{−iTΔt/ħ} e^{−iUΔt/2ħ}` with the kinetic factor
//! applied in momentum space. The spectrum uses `P(−t) = conj P(t)`, so the
//! transform runs over `[−T, T]` and is real.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::grid::{apply_hamiltonian, Grid, WaveFunction};
use crate::potentials::PotentialSpec;
use crate::spectrum::{Method, SpectrumResult};

/// Largest tolerated `|1 − ‖ψ‖|` during a run.
pub const NORM_DRIFT_TOL: f64 = 1e-10;
/// Peaks below this fraction of the spectral maximum are ignored.
pub const PEAK_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Weight at `s = t/T ∈ [0, 1]` for a window symmetric about t = 0.
    fn symmetric(self, s: f64) -> f64 {
        match self {
            Window::Hann => (0.5 * PI * s).cos().powi(2),
            Window::Rectangular => 1.0,
        }
    }

    /// Weight at `s = t/T ∈ [0, 1]` for a window on `[0, T]`.
    fn one_sided(self, s: f64) -> f64 {
        match self {
            Window::Hann => (PI * s).sin().powi(2),
            Window::Rectangular => 1.0,
        }
    }

    /// Transform of the symmetric window normalised to 1 at zero, `x = δT/ħ`.
    fn kernel(self, x: f64) -> f64 {
        let sinc = |u: f64| if u.abs() < 1e-8 { 1.0 } else { u.sin() / u };
        match self {
            Window::Hann => sinc(x) + 0.5 * (sinc(x - PI) + sinc(x + PI)),
            Window::Rectangular => sinc(x),
        }
    }
}

/// Grid, sampled potential, time step and the precomputed phase tables.
#[derive(Clone)]
pub struct PropagationPlan {
    grid: Grid,
    potential: Vec<f64>,
    dt: f64,
    n_steps: usize,
    hbar: f64,
    kinetic_phase: Vec<Complex64>,
    half_potential_phase: Vec<Complex64>,
    fft: FftPlan,
}

impl std::fmt::Debug for PropagationPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PropagationPlan")
            .field("grid", &self.grid)
            .field("dt", &self.dt)
            .field("n_steps", &self.n_steps)
            .field("hbar", &self.hbar)
            .finish()
    }
}

/// `ħ²·max(k²/2) + max|U|` on the lattice.
pub fn max_energy(grid: &Grid, potential: &[f64], hbar: f64) -> f64 {
    let umax = potential.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    hbar * hbar * grid.kinetic_max() + umax
}

impl PropagationPlan {
    /// ħ = 1.
    pub fn new(grid: impl Into<Grid>, potential: &PotentialSpec, dt: f64, n_steps: usize) -> Result<Self> {
        let grid = grid.into();
        let u = potential.sample(&grid)?;
        Self::from_samples(grid, u, dt, n_steps, 1.0)
    }

    /// Time step at the bandwidth limit `ħ/E_max`, `2^exponent` steps.
    pub fn auto(grid: impl Into<Grid>, potential: &PotentialSpec, exponent: u32, hbar: f64) -> Result<Self> {
        let grid = grid.into();
        let u = potential.sample(&grid)?;
        let dt = hbar / max_energy(&grid, &u, hbar);
        Self::from_samples(grid, u, dt, 1usize << exponent, hbar)
    }

    pub fn from_samples(grid: impl Into<Grid>, potential: Vec<f64>, dt: f64, n_steps: usize, hbar: f64) -> Result<Self> {
        let grid = grid.into();
        if potential.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} potential samples for {} nodes",
                potential.len(),
                grid.len()
            )));
        }
        if !(hbar > 0.0) {
            return Err(Error::domain("ħ must be positive"));
        }
        if potential.iter().any(|u| !u.is_finite()) {
            return Err(Error::domain("potential has non-finite samples"));
        }
        if !n_steps.is_power_of_two() {
            return Err(Error::domain(format!("n_steps = {n_steps} is not a power of two")));
        }
        let limit = hbar / max_energy(&grid, &potential, hbar);
        if !(dt != 0.0 && dt.abs() <= limit * (1.0 + 1e-12)) {
            return Err(Error::domain(format!("|Δt| = {} must be nonzero and at most ħ/E_max = {limit}", dt.abs())));
        }
        let kinetic_phase = grid
            .kinetic_symbol()
            .iter()
            .map(|s| Complex64::from_polar(1.0, -hbar * s * dt))
            .collect();
        let half_potential_phase = potential
            .iter()
            .map(|u| Complex64::from_polar(1.0, -0.5 * u * dt / hbar))
            .collect();
        let fft = FftPlan::new(&grid);
        Ok(Self { grid, potential, dt, n_steps, hbar, kinetic_phase, half_potential_phase, fft })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.dt.abs()
    }

    /// Same plan running backwards in time.
    pub fn reversed(&self) -> Self {
        Self {
            grid: self.grid,
            potential: self.potential.clone(),
            dt: -self.dt,
            n_steps: self.n_steps,
            hbar: self.hbar,
            kinetic_phase: self.kinetic_phase.iter().map(|c| c.conj()).collect(),
            half_potential_phase: self.half_potential_phase.iter().map(|c| c.conj()).collect(),
            fft: self.fft.clone(),
        }
    }

    /// Same plan with a different number of steps.
    pub fn with_steps(&self, n_steps: usize) -> Result<Self> {
        if !n_steps.is_power_of_two() {
            return Err(Error::domain(format!("n_steps = {n_steps} is not a power of two")));
        }
        let mut p = self.clone();
        p.n_steps = n_steps;
        Ok(p)
    }

    /// One Strang step in place.
    pub fn step(&self, psi: &mut [Complex64]) {
        for (v, p) in psi.iter_mut().zip(&self.half_potential_phase) {
            *v *= p;
        }
        self.fft.forward(psi);
        for (v, p) in psi.iter_mut().zip(&self.kinetic_phase) {
            *v *= p;
        }
        self.fft.inverse(psi);
        for (v, p) in psi.iter_mut().zip(&self.half_potential_phase) {
            *v *= p;
        }
    }
}

/// `P(t_j) = ⟨ψ₀|ψ(t_j)⟩`, `t_j = jΔt`, `j < n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Autocorrelation {
    pub samples: Vec<Complex64>,
    pub dt: f64,
    pub hbar: f64,
}

impl Autocorrelation {
    pub fn total_time(&self) -> f64 {
        self.samples.len() as f64 * self.dt.abs()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,re,im")?;
        for (j, p) in self.samples.iter().enumerate() {
            writeln!(out, "{:.12e},{:.17e},{:.17e}", j as f64 * self.dt, p.re, p.im)?;
        }
        Ok(())
    }
}

/// States stored every `stride` steps.
#[derive(Clone, Debug)]
pub struct Snapshots {
    pub grid: Grid,
    pub potential: Vec<f64>,
    pub dt: f64,
    pub hbar: f64,
    pub stride: usize,
    pub states: Vec<Vec<Complex64>>,
}

impl Snapshots {
    pub fn total_time(&self) -> f64 {
        self.states.len() as f64 * self.stride as f64 * self.dt.abs()
    }

    pub fn write_binary<W: Write>(&self, index: usize, out: W) -> Result<()> {
        let s = self.states.get(index).ok_or(Error::IndexOutOfRange { index, len: self.states.len() })?;
        WaveFunction::new(self.grid, s.clone())?.write_binary(out)
    }
}

/// What to record besides the autocorrelation.
#[derive(Clone, Debug, Default)]
pub struct EvolveOptions {
    pub snapshot_stride: Option<usize>,
    /// Energies at which states are projected out on the fly.
    pub project: Vec<f64>,
    pub window: Window,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub energy: f64,
    /// Normalized, global phase chosen to make the largest amplitude real.
    pub state: WaveFunction,
    /// Norm of the windowed projection before normalization.
    pub raw_norm: f64,
    /// `‖(H − E)ψ‖/‖ψ‖`.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub autocorrelation: Autocorrelation,
    pub final_state: WaveFunction,
    pub snapshots: Option<Snapshots>,
    pub projections: Vec<Reconstruction>,
}

fn norm_of(values: &[Complex64], dv: f64) -> f64 {
    (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dv).sqrt()
}

pub fn evolve(psi0: &WaveFunction, plan: &PropagationPlan) -> Result<Autocorrelation> {
    Ok(evolve_with(psi0, plan, &EvolveOptions::default())?.autocorrelation)
}

pub fn evolve_with(psi0: &WaveFunction, plan: &PropagationPlan, opts: &EvolveOptions) -> Result<Evolution> {
    if psi0.grid() != &plan.grid {
        return Err(Error::GridMismatch("initial state and plan use different grids".into()));
    }
    psi0.check_normalized()?;
    if opts.snapshot_stride == Some(0) {
        return Err(Error::domain("snapshot stride must be positive"));
    }
    let dv = plan.grid.cell_volume();
    let n = plan.n_steps;
    let total = plan.total_time();
    let start: Vec<Complex64> = psi0.values().to_vec();
    let mut psi = start.clone();
    let mut samples = Vec::with_capacity(n);
    let mut snaps = opts.snapshot_stride.map(|_| Vec::new());
    let mut acc: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); psi.len()]; opts.project.len()];
    let mut wsum = 0.0;
    for j in 0..n {
        let p: Complex64 = start.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dv;
        samples.push(p);
        if let (Some(s), Some(stride)) = (snaps.as_mut(), opts.snapshot_stride) {
            if j % stride == 0 {
                s.push(psi.clone());
            }
        }
        if !opts.project.is_empty() {
            let t = j as f64 * plan.dt;
            let w = opts.window.one_sided(j as f64 / n as f64);
            wsum += w;
            for (a, &e) in acc.iter_mut().zip(&opts.project) {
                let ph = Complex64::from_polar(w, e * t / plan.hbar);
                for (x, v) in a.iter_mut().zip(&psi) {
                    *x += ph * v;
                }
            }
        }
        plan.step(&mut psi);
        let drift = (1.0 - norm_of(&psi, dv)).abs();
        if !(drift <= NORM_DRIFT_TOL) {
            return Err(Error::NormDrift { step: j + 1, drift });
        }
    }
    let projections = acc
        .into_iter()
        .zip(&opts.project)
        .map(|(a, &e)| {
            let raw: Vec<Complex64> = a.into_iter().map(|v| v / wsum).collect();
            finish_projection(&plan.grid, &plan.potential, plan.hbar, e, raw)
        })
        .collect::<Result<Vec<_>>>()?;
    let _ = total;
    Ok(Evolution {
        autocorrelation: Autocorrelation { samples, dt: plan.dt, hbar: plan.hbar },
        final_state: WaveFunction::new(plan.grid, psi)?,
        snapshots: snaps.map(|states| Snapshots {
            grid: plan.grid,
            potential: plan.potential.clone(),
            dt: plan.dt,
            hbar: plan.hbar,
            stride: opts.snapshot_stride.unwrap_or(1),
            states,
        }),
        projections,
    })
}

fn finish_projection(grid: &Grid, potential: &[f64], hbar: f64, energy: f64, mut raw: Vec<Complex64>) -> Result<Reconstruction> {
    let raw_norm = norm_of(&raw, grid.cell_volume());
    if !(raw_norm > 0.0) {
        return Err(Error::Numerical(format!("projection at E = {energy} vanished")));
    }
    let peak = raw.iter().copied().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr())).unwrap_or(Complex64::new(1.0, 0.0));
    let phase = Complex64::from_polar(1.0 / raw_norm, -peak.arg());
    raw.iter_mut().for_each(|v| *v *= phase);
    let state = WaveFunction::new(*grid, raw)?;
    let hpsi = apply_hamiltonian(grid, state.values(), potential, hbar);
    let res: f64 = hpsi.iter().zip(state.values()).map(|(h, v)| (h - v * energy).norm_sqr()).sum::<f64>() * grid.cell_volume();
    Ok(Reconstruction { energy, state, raw_norm, residual: res.sqrt() })
}

/// Windowed projection `Σ w_j ψ(t_j) e^{iEt_j/ħ} / Σ w_j` of stored snapshots.
///
/// `levels` is the known spectrum; another level closer than `2πħ/T` makes
/// the projection ambiguous and is refused with the record length needed.
pub fn reconstruct_state(snapshots: &Snapshots, energy: f64, window: Window, levels: &[f64]) -> Result<Reconstruction> {
    let total = snapshots.total_time();
    if snapshots.states.is_empty() || total <= 0.0 {
        return Err(Error::domain("no snapshots recorded"));
    }
    check_isolated(energy, levels, total, snapshots.hbar)?;
    let n = snapshots.states.len();
    let step = snapshots.stride as f64 * snapshots.dt;
    let mut acc = vec![Complex64::new(0.0, 0.0); snapshots.states[0].len()];
    let mut wsum = 0.0;
    for (j, s) in snapshots.states.iter().enumerate() {
        let w = window.one_sided(j as f64 / n as f64);
        wsum += w;
        let ph = Complex64::from_polar(w, energy * j as f64 * step / snapshots.hbar);
        for (a, v) in acc.iter_mut().zip(s) {
            *a += ph * v;
        }
    }
    acc.iter_mut().for_each(|v| *v /= wsum);
    finish_projection(&snapshots.grid, &snapshots.potential, snapshots.hbar, energy, acc)
}

/// Refuses `energy` if a level other than its own lies within `2πħ/T`.
pub fn check_isolated(energy: f64, levels: &[f64], total_time: f64, hbar: f64) -> Result<()> {
    let own = hbar / total_time;
    let gap = levels
        .iter()
        .map(|l| (l - energy).abs())
        .filter(|d| *d > own)
        .fold(f64::INFINITY, f64::min);
    let needed = 2.0 * PI * hbar / total_time;
    if gap < needed {
        return Err(Error::Unresolved { energy, required_t: 2.0 * PI * hbar / gap });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Spectra

/// `S(E) = Δt Σ_{|j|<n} w(t_j) P(t_j) e^{iEt_j/ħ}` with `P(−t) = conj P(t)`.
pub fn spectral_density(p: &Autocorrelation, window: Window, energies: &[f64]) -> Vec<f64> {
    let n = p.samples.len();
    let weighted: Vec<Complex64> =
        p.samples.iter().enumerate().map(|(j, v)| v * window.symmetric(j as f64 / n as f64)).collect();
    energies
        .iter()
        .map(|&e| {
            let rot = Complex64::from_polar(1.0, e * p.dt / p.hbar);
            let mut ph = Complex64::new(1.0, 0.0);
            let mut s = Complex64::new(0.0, 0.0);
            for a in weighted.iter().skip(1) {
                ph *= rot;
                s += a * ph;
            }
            p.dt * (weighted[0].re + 2.0 * s.re)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub energy: f64,
    pub height: f64,
}

/// Peak search settings; the energy range filters the reported peaks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumOptions {
    pub window: Window,
    pub e_min: f64,
    pub e_max: f64,
    pub floor: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { window: Window::Hann, e_min: f64::NEG_INFINITY, e_max: f64::INFINITY, floor: PEAK_FLOOR }
    }
}

impl SpectrumOptions {
    pub fn new(window: Window) -> Self {
        Self { window, ..Self::default() }
    }

    pub fn range(mut self, e_min: f64, e_max: f64) -> Self {
        self.e_min = e_min;
        self.e_max = e_max;
        self
    }
}

/// Local maxima of `S(E)` above `floor · max S`.
///
/// A zero-padded FFT gives `S` on a grid of spacing ≤ 0.8ħ/T; each maximum
/// is re-sampled at spacing ≤ 0.1ħ/T and refined by a parabola through the
/// best three points.
pub fn find_peaks(p: &Autocorrelation, opts: &SpectrumOptions) -> Result<Vec<Peak>> {
    let n = p.samples.len();
    if n < 2 || !(p.dt != 0.0) {
        return Err(Error::domain("autocorrelation needs at least two samples"));
    }
    let total = p.total_time();
    let m = (8 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (j, v) in p.samples.iter().enumerate() {
        buf[j] = v * opts.window.symmetric(j as f64 / n as f64);
    }
    let w0 = buf[0].re;
    FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);
    let coarse: Vec<f64> = buf.iter().map(|x| p.dt * (2.0 * x.re - w0)).collect();
    let de = 2.0 * PI * p.hbar / (m as f64 * p.dt);
    let energy_of = |k: usize| if k <= m / 2 { k as f64 * de } else { (k as f64 - m as f64) * de };
    let smax = coarse.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(smax > 0.0) {
        return Ok(Vec::new());
    }
    let fine = 0.1 * p.hbar / total;
    let mut peaks = Vec::new();
    for k in 0..m {
        let (a, b, c) = (coarse[(k + m - 1) % m], coarse[k], coarse[(k + 1) % m]);
        if !(b > a && b >= c && b > opts.floor * smax) {
            continue;
        }
        let e0 = energy_of(k);
        if e0 < opts.e_min - de || e0 > opts.e_max + de {
            continue;
        }
        if let Some(pk) = refine_peak(p, opts.window, e0, de, fine) {
            if pk.energy >= opts.e_min && pk.energy <= opts.e_max {
                peaks.push(pk);
            }
        }
    }
    peaks.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    peaks.dedup_by(|a, b| (a.energy - b.energy).abs() < fine);
    // drop sidelobes: strongest first, a peak survives if less than half its
    // height is explained by the window response of the peaks already kept
    let scale = total / p.hbar;
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[b].height.total_cmp(&peaks[a].height));
    let mut kept: Vec<Peak> = Vec::new();
    for i in order {
        let q = peaks[i];
        let explained: f64 = kept.iter().map(|r| r.height * opts.window.kernel((q.energy - r.energy) * scale)).sum();
        if q.height - explained >= 0.5 * q.height {
            kept.push(q);
        }
    }
    kept.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(kept)
}

fn refine_peak(p: &Autocorrelation, window: Window, e0: f64, half: f64, fine: f64) -> Option<Peak> {
    let count = (2.0 * half / fine).ceil() as usize + 1;
    let h = 2.0 * half / (count - 1) as f64;
    let mut lo = e0 - half;
    for _ in 0..4 {
        let es: Vec<f64> = (0..count).map(|i| lo + i as f64 * h).collect();
        let s = spectral_density(p, window, &es);
        let best = (0..count).max_by(|&a, &b| s[a].total_cmp(&s[b]))?;
        if best == 0 || best == count - 1 {
            // maximum on the edge: shift the window and retry
            lo += if best == 0 { -half } else { half };
            continue;
        }
        let (a, b, c) = (s[best - 1], s[best], s[best + 1]);
        let den = a - 2.0 * b + c;
        let d = if den < 0.0 { 0.5 * (a - c) / den } else { 0.0 };
        return Some(Peak { energy: es[best] + d * h, height: b - 0.25 * (a - c) * d });
    }
    None
}

/// Spectral-method levels: peak positions with uncertainty `ħ/T`.
pub fn extract_spectrum(p: &Autocorrelation, opts: &SpectrumOptions) -> Result<SpectrumResult> {
    let total = p.total_time();
    if !(total > 0.0) {
        return Err(Error::domain("autocorrelation has zero length"));
    }
    let peaks = find_peaks(p, opts)?;
    let energies: Vec<f64> = peaks.iter().map(|pk| pk.energy).collect();
    let mut out = SpectrumResult::from_energies(&energies, p.hbar / total, Method::Spectral);
    if peaks.is_empty() {
        out.diagnostics.push("no peaks above the floor".into());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Initial states

/// Normalized Gaussian `Π exp(−(x_i−c_i)²/(2σ_i²))`.
pub fn gaussian_state(grid: impl Into<Grid>, center: &[f64], sigma: &[f64]) -> Result<WaveFunction> {
    let grid = grid.into();
    if center.len() != grid.dims() || sigma.len() != grid.dims() {
        return Err(Error::domain("centre/width dimension does not match the grid"));
    }
    let vals = (0..grid.len())
        .map(|i| {
            let x = grid.coordinates(i);
            let e: f64 = x.iter().zip(center).zip(sigma).map(|((x, c), s)| (x - c).powi(2) / (2.0 * s * s)).sum();
            Complex64::new((-e).exp(), 0.0)
        })
        .collect();
    WaveFunction::new(grid, vals)?.normalized()
}

/// Smooth random phase `Σ_axis Σ_j a_j sin(jπ(x−x_min)/L + φ_j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseMask {
    pub seed: u64,
    pub amplitude: f64,
    pub modes: usize,
}

/// Gaussian at a well minimum with the widths of the local harmonic ground
/// state, `σ_i² = ħ/√U_ii`, optionally with a random phase mask.
pub fn well_packet(
    grid: impl Into<Grid>,
    potential: &PotentialSpec,
    minimum: &[f64],
    hbar: f64,
    mask: Option<PhaseMask>,
) -> Result<WaveFunction> {
    let grid = grid.into();
    let h = 1e-4;
    let mut sigma = Vec::new();
    for i in 0..minimum.len() {
        let mut a = minimum.to_vec();
        let mut b = minimum.to_vec();
        a[i] += h;
        b[i] -= h;
        let uii = (potential.value(&a)? - 2.0 * potential.value(minimum)? + potential.value(&b)?) / (h * h);
        if !(uii > 0.0) {
            return Err(Error::domain(format!("no confining curvature along axis {i} at the given point")));
        }
        sigma.push((hbar / uii.sqrt()).sqrt());
    }
    let mut psi = gaussian_state(grid, minimum, &sigma)?;
    if let Some(m) = mask {
        let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
        let axes = grid.axes();
        let coeffs: Vec<Vec<(f64, f64)>> = axes
            .iter()
            .map(|_| {
                (1..=m.modes)
                    .map(|_| (rng.random_range(-m.amplitude..=m.amplitude), rng.random_range(0.0..2.0 * PI)))
                    .collect()
            })
            .collect();
        for (i, v) in psi.values_mut().iter_mut().enumerate() {
            let x = grid.coordinates(i);
            let mut theta = 0.0;
            for ((xi, ax), cs) in x.iter().zip(&axes).zip(&coeffs) {
                let l = ax.x_max - ax.x_min;
                for (j, (a, ph)) in cs.iter().enumerate() {
                    theta += a * ((j + 1) as f64 * PI * (xi - ax.x_min) / l + ph).sin();
                }
            }
            *v *= Complex64::from_polar(1.0, theta);
        }
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{expectation_energy_sampled, inner_product, Grid1D, Grid2D};
    use crate::specfun::oscillator_function;
    use crate::susy::{build_model, SusyParams};

    fn ho_plan(exponent: u32) -> PropagationPlan {
        let g = Grid1D::symmetric(10.0, 7).unwrap();
        PropagationPlan::auto(g, &PotentialSpec::Harmonic { omega: 1.0 }, exponent, 1.0).unwrap()
    }

    fn ho_state(grid: &Grid, n: usize) -> WaveFunction {
        let g = match grid {
            Grid::One(g) => *g,
            Grid::Two(_) => unreachable!(),
        };
        WaveFunction::from_fn_1d(g, |x| Complex64::new(oscillator_function(n, x, 1.0), 0.0))
    }

    #[test]
    fn stationary_state_only_rotates() {
        let plan = ho_plan(12);
        let psi = ho_state(plan.grid(), 0).normalized().unwrap();
        let p = evolve(&psi, &plan).unwrap();
        assert!((p.samples[0] - 1.0).norm() < 1e-12);
        for (j, v) in p.samples.iter().enumerate() {
            let t = j as f64 * plan.dt();
            assert!((v.norm() - 1.0).abs() < 1e-10);
            let d = (v - Complex64::from_polar(1.0, -0.5 * t)).norm();
            // splitting shifts the level by O(Δt²)
            assert!(d < plan.dt().powi(2) * t + 1e-12, "t={t} d={d}");
        }
    }

    #[test]
    fn coherent_state_revives_after_one_period() {
        let plan = ho_plan(13);
        let psi = gaussian_state(*plan.grid(), &[2.0], &[1.0]).unwrap();
        let p = evolve(&psi, &plan).unwrap();
        let dt = plan.dt();
        // largest |P| within half a period of 2π
        let (jbest, _) = p
            .samples
            .iter()
            .enumerate()
            .filter(|(j, _)| (*j as f64 * dt - 2.0 * PI).abs() < PI / 2.0)
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert!((jbest as f64 * dt - 2.0 * PI).abs() <= dt);
    }

    #[test]
    fn free_gaussian_spreads_as_predicted() {
        let g = Grid1D::symmetric(20.0, 9).unwrap();
        let plan = PropagationPlan::auto(g, &PotentialSpec::Polynomial1D { coefficients: vec![0.0] }, 11, 1.0).unwrap();
        let s0: f64 = 0.8;
        // |ψ|² has standard deviation s0 when the amplitude width is √2·s0
        let psi = gaussian_state(g, &[0.0], &[2f64.sqrt() * s0]).unwrap();
        let ev = evolve_with(&psi, &plan, &EvolveOptions::default()).unwrap();
        let t = plan.total_time();
        let dx = g.dx();
        let var: f64 = ev
            .final_state
            .values()
            .iter()
            .zip(g.points())
            .map(|(v, x)| v.norm_sqr() * x * x * dx)
            .sum();
        let exact = s0 * s0 + (t / (2.0 * s0)).powi(2);
        assert!((var.sqrt() - exact.sqrt()).abs() < 1e-6, "{} vs {}", var.sqrt(), exact.sqrt());
    }

    #[test]
    fn single_mode_fourier_pair() {
        let e0 = 1.2345;
        let dt = 0.01;
        let samples: Vec<Complex64> = (0..1024).map(|j| Complex64::from_polar(1.0, -e0 * j as f64 * dt)).collect();
        let p = Autocorrelation { samples, dt, hbar: 1.0 };
        let peaks = find_peaks(&p, &SpectrumOptions::new(Window::Rectangular)).unwrap();
        let main = peaks.iter().max_by(|a, b| a.height.total_cmp(&b.height)).unwrap();
        assert!((main.energy - e0).abs() < 0.1 / p.total_time());
        assert_eq!(peaks.len(), 1, "sidelobes must be rejected: {peaks:?}");
    }

    #[test]
    fn oscillator_peaks_within_inverse_time() {
        let plan = ho_plan(11);
        let psi = gaussian_state(*plan.grid(), &[2.0], &[1.0]).unwrap();
        let p = evolve(&psi, &plan).unwrap();
        let s = extract_spectrum(&p, &SpectrumOptions::new(Window::Rectangular).range(-1.0, 6.0)).unwrap();
        let t = p.total_time();
        for n in 1..4 {
            let e = n as f64 + 0.5;
            let err = s.energies().iter().map(|x| (x - e).abs()).fold(f64::INFINITY, f64::min);
            assert!(err <= 1.0 / t, "n={n}: {err} > {}", 1.0 / t);
        }
    }

    #[test]
    fn susy_two_state_packet_has_two_peaks() {
        let g = Grid1D::symmetric(10.0, 8).unwrap();
        let params = SusyParams::double_well(-3.0, 0.5);
        let model = build_model(&params, &g, 3).unwrap();
        let spec = PotentialSpec::Susy(model.evaluator());
        let plan = PropagationPlan::auto(g, &spec, 15, 1.0).unwrap();
        let mix: Vec<Complex64> =
            model.states[0].values().iter().zip(model.states[1].values()).map(|(a, b)| a + b).collect();
        let psi = WaveFunction::new(g, mix).unwrap().normalized().unwrap();
        let p = evolve(&psi, &plan).unwrap();
        let s = extract_spectrum(&p, &SpectrumOptions::default()).unwrap();
        let known = model.energies();
        assert_eq!(s.len(), 2, "{:?}", s.energies());
        for (got, want) in s.energies().iter().zip(&known) {
            assert!((got - want).abs() < 1.0 / p.total_time());
        }
    }

    #[test]
    fn reconstructs_oscillator_state() {
        let plan = ho_plan(14);
        let grid = *plan.grid();
        let mix: Vec<Complex64> = (0..4)
            .map(|n| ho_state(&grid, n))
            .fold(vec![Complex64::new(0.0, 0.0); grid.len()], |acc, s| {
                acc.iter().zip(s.values()).map(|(a, b)| a + b).collect()
            });
        let psi = WaveFunction::new(grid, mix).unwrap().normalized().unwrap();
        let opts = EvolveOptions { snapshot_stride: Some(8), project: vec![1.5, 2.0], window: Window::Hann };
        let ev = evolve_with(&psi, &plan, &opts).unwrap();
        let exact = ho_state(&grid, 1);
        let on = &ev.projections[0];
        assert!(inner_product(&exact, &on.state).unwrap().norm() > 0.999);
        assert!(on.residual < 1e-2);
        // between levels the projection nearly vanishes
        assert!(ev.projections[1].raw_norm < 1e-2 * on.raw_norm);
        let snaps = ev.snapshots.unwrap();
        let levels = [0.5, 1.5, 2.5, 3.5];
        let rec = reconstruct_state(&snaps, 1.5, Window::Hann, &levels).unwrap();
        assert!(inner_product(&exact, &rec.state).unwrap().norm() > 0.999);
    }

    #[test]
    fn unresolved_level_refused() {
        let err = check_isolated(1.0, &[1.0, 1.05], 100.0, 1.0).unwrap_err();
        match err {
            Error::Unresolved { required_t, .. } => assert!((required_t - 2.0 * PI / 0.05).abs() < 1e-9),
            e => panic!("{e:?}"),
        }
        assert!(check_isolated(1.0, &[0.0, 1.0, 2.0], 10.0, 1.0).is_ok());
    }

    #[test]
    fn unitarity_and_reversibility() {
        let g = Grid2D::square(4.0, 5).unwrap();
        let plan = PropagationPlan::auto(g, &PotentialSpec::Qo { w: 18.0 }, 12, 1.0).unwrap();
        let psi = gaussian_state(g, &[0.3, -0.2], &[0.4, 0.5]).unwrap();
        let fwd = evolve_with(&psi, &plan, &EvolveOptions::default()).unwrap();
        let back = evolve_with(&fwd.final_state, &plan.reversed(), &EvolveOptions::default()).unwrap();
        let fid = inner_product(&psi, &back.final_state).unwrap().norm();
        assert!(fid > 1.0 - 1e-8, "fidelity {fid}");
    }

    #[test]
    fn norm_breach_aborts_with_step() {
        let g = Grid1D::symmetric(5.0, 6).unwrap();
        let mut u = vec![0.0; 64];
        u[10] = f64::NAN;
        let plan = PropagationPlan::from_samples(g, u, 1e-3, 16, 1.0);
        // non-finite samples are refused up front
        assert!(plan.is_err());
        let mut plan = PropagationPlan::from_samples(g, vec![0.0; 64], 1e-3, 16, 1.0).unwrap();
        plan.half_potential_phase[10] = Complex64::new(1.5, 0.0);
        let psi = gaussian_state(g, &[0.0], &[1.0]).unwrap();
        match evolve(&psi, &plan) {
            Err(Error::NormDrift { step, .. }) => assert_eq!(step, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn second_order_energy_drift() {
        let g = Grid1D::symmetric(6.0, 7).unwrap();
        let u = PotentialSpec::Polynomial1D { coefficients: vec![0.0, 0.0, -1.0, 0.0, 0.25] };
        let samples = u.sample(&g.into()).unwrap();
        let psi = gaussian_state(g, &[0.8], &[0.6]).unwrap();
        let e0 = expectation_energy_sampled(&psi, &samples, 1.0).unwrap();
        let dt0 = 1.0 / max_energy(&g.into(), &samples, 1.0);
        let mut drift = Vec::new();
        for k in 0..2 {
            let dt = dt0 / (1 << k) as f64;
            let n = 1usize << (10 + k);
            let plan = PropagationPlan::from_samples(g, samples.clone(), dt, n, 1.0).unwrap();
            let ev = evolve_with(&psi, &plan, &EvolveOptions { snapshot_stride: Some(1 << k), ..Default::default() }).unwrap();
            let snaps = ev.snapshots.unwrap();
            let worst = snaps
                .states
                .iter()
                .map(|s| {
                    let w = WaveFunction::new(g, s.clone()).unwrap().normalized().unwrap();
                    (expectation_energy_sampled(&w, &samples, 1.0).unwrap() - e0).abs()
                })
                .fold(0.0, f64::max);
            drift.push(worst);
        }
        let order = (drift[0] / drift[1]).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn levels_do_not_depend_on_initial_state() {
        let g = Grid1D::symmetric(6.0, 7).unwrap();
        let u = PotentialSpec::Polynomial1D { coefficients: vec![0.0, 0.0, -1.0, 0.0, 0.25] };
        let plan = PropagationPlan::auto(g, &u, 16, 1.0).unwrap();
        let a = gaussian_state(g, &[1.5], &[0.6]).unwrap();
        let b = well_packet(g, &u, &[2f64.sqrt()], 1.0, Some(PhaseMask { seed: 7, amplitude: 0.3, modes: 3 })).unwrap();
        let opts = SpectrumOptions::default().range(-1.5, 1.0);
        let sa = extract_spectrum(&evolve(&a, &plan).unwrap(), &opts).unwrap();
        let sb = extract_spectrum(&evolve(&b, &plan).unwrap(), &opts).unwrap();
        let t = plan.total_time();
        let mut matched = 0;
        for e in sb.energies() {
            if let Some(d) = sa.energies().iter().map(|x| (x - e).abs()).min_by(f64::total_cmp) {
                if d < 2.0 * PI / t {
                    assert!(d < 1.0 / t, "{e}: {d}");
                    matched += 1;
                }
            }
        }
        assert!(matched >= 2, "{:?} / {:?}", sa.energies(), sb.energies());
    }

    #[test]
    fn time_step_limit_enforced() {
        let g = Grid1D::symmetric(10.0, 7).unwrap();
        let u = PotentialSpec::Harmonic { omega: 1.0 }.sample(&g.into()).unwrap();
        let limit = 1.0 / max_energy(&g.into(), &u, 1.0);
        assert!(PropagationPlan::from_samples(g, u.clone(), 1.01 * limit, 8, 1.0).is_err());
        assert!(PropagationPlan::from_samples(g, u.clone(), limit, 12, 1.0).is_err());
        assert!(PropagationPlan::from_samples(g, u, limit, 16, 1.0).is_ok());
    }

    #[test]
    fn autocorrelation_csv() {
        let p = Autocorrelation { samples: vec![Complex64::new(1.0, 0.0); 4], dt: 0.5, hbar: 1.0 };
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("t,re,im\n"));
    }
}
