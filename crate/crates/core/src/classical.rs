//! Classical motion in 2D potentials (m = 1): 4th-order Yoshida integration
//! with the tangent map, surfaces of section, and Lyapunov-based regularity
//! estimates over per-well ensembles.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::{eval_qo, qo_peripheral_minimum, qo_saddle, sym2_eigenvalues, Polynomial2D, PotentialSpec};

/// `(x, y, p_x, p_y)`.
pub type PhasePoint = [f64; 4];

/// Default regular/chaotic threshold on the Lyapunov estimate (per unit time).
pub const REGULARITY_THRESHOLD: f64 = 1e-3;

// Yoshida triple-jump weights.
const W1: f64 = 1.351_207_191_959_657_8;
const W0: f64 = -1.702_414_383_919_315_3;

enum Field {
    Spec(PotentialSpec),
    Poly { u: Polynomial2D, ux: Polynomial2D, uy: Polynomial2D, uxx: Polynomial2D, uxy: Polynomial2D, uyy: Polynomial2D },
}

impl Field {
    fn new(spec: &PotentialSpec) -> Result<Self> {
        if spec.dims() != 2 {
            return Err(Error::domain("classical dynamics needs a 2D potential"));
        }
        spec.gradient(0.0, 0.0)?;
        Ok(match spec {
            PotentialSpec::Polynomial2D(p) => Field::Poly {
                u: p.clone(),
                ux: p.derivative(1, 0),
                uy: p.derivative(0, 1),
                uxx: p.derivative(2, 0),
                uxy: p.derivative(1, 1),
                uyy: p.derivative(0, 2),
            },
            other => Field::Spec(other.clone()),
        })
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            Field::Spec(s) => s.value_2d(x, y).unwrap_or(f64::NAN),
            Field::Poly { u, .. } => u.eval(x, y),
        }
    }

    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            Field::Spec(s) => s.gradient(x, y).unwrap_or([f64::NAN; 2]),
            Field::Poly { ux, uy, .. } => [ux.eval(x, y), uy.eval(x, y)],
        }
    }

    fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        match self {
            Field::Spec(s) => s.hessian(x, y).unwrap_or([[f64::NAN; 2]; 2]),
            Field::Poly { uxx, uxy, uyy, .. } => {
                let c = uxy.eval(x, y);
                [[uxx.eval(x, y), c], [c, uyy.eval(x, y)]]
            }
        }
    }

    fn energy(&self, s: &PhasePoint) -> f64 {
        0.5 * (s[2] * s[2] + s[3] * s[3]) + self.value(s[0], s[1])
    }
}

/// Kinetic plus potential energy.
pub fn hamiltonian(potential: &PotentialSpec, s: &PhasePoint) -> Result<f64> {
    Ok(0.5 * (s[2] * s[2] + s[3] * s[3]) + potential.value_2d(s[0], s[1])?)
}

/// Natural energy unit used for relative drift: the QO saddle energy, the
/// D5 well depth, otherwise 1.
pub fn energy_scale(potential: &PotentialSpec) -> f64 {
    match potential {
        PotentialSpec::Qo { w } => qo_saddle(*w).and_then(|x| eval_qo(x, 0.0, *w).ok()).unwrap_or(1.0),
        PotentialSpec::D5 { b, .. } => (b * b).max(f64::MIN_POSITIVE),
        _ => 1.0,
    }
}

/// Shortest small-oscillation period `2π/√λ_max` at the given minimum.
pub fn characteristic_period(potential: &PotentialSpec, minimum: [f64; 2]) -> Result<f64> {
    let l = sym2_eigenvalues(potential.hessian(minimum[0], minimum[1])?)[1];
    if !(l > 0.0) {
        return Err(Error::domain("no positive curvature at the given point"));
    }
    Ok(2.0 * PI / l.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    /// Keep every `sample_stride`-th state; 0 keeps only the endpoints.
    pub sample_stride: usize,
    /// Steps between tangent-vector renormalizations.
    pub renorm_interval: usize,
    /// Confinement box `(lo, hi)`; leaving it stops the run.
    pub bounds: Option<([f64; 2], [f64; 2])>,
    /// Seeds the initial tangent direction.
    pub seed: u64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { sample_stride: 1, renorm_interval: 100, bounds: None, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub initial: PhasePoint,
    pub energy: f64,
    pub h: f64,
    pub steps: usize,
    pub sample_stride: usize,
    pub samples: Vec<PhasePoint>,
    /// `max |H − E| / max(|E|, scale)` over the sampled states and the end point.
    pub max_energy_error: f64,
    pub escaped: bool,
    /// Largest-Lyapunov estimate, `Σ ln(growth) / t`.
    pub lyapunov: f64,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.h.abs()
    }

    pub fn final_state(&self) -> PhasePoint {
        *self.samples.last().unwrap_or(&self.initial)
    }
}

struct Stepper<'a> {
    field: &'a Field,
}

impl Stepper<'_> {
    #[inline]
    fn kick(&self, s: &mut PhasePoint, v: &mut PhasePoint, tau: f64) {
        let g = self.field.gradient(s[0], s[1]);
        let m = self.field.hessian(s[0], s[1]);
        s[2] -= tau * g[0];
        s[3] -= tau * g[1];
        v[2] -= tau * (m[0][0] * v[0] + m[0][1] * v[1]);
        v[3] -= tau * (m[1][0] * v[0] + m[1][1] * v[1]);
    }

    #[inline]
    fn drift(s: &mut PhasePoint, v: &mut PhasePoint, tau: f64) {
        s[0] += tau * s[2];
        s[1] += tau * s[3];
        v[0] += tau * v[2];
        v[1] += tau * v[3];
    }

    /// One Yoshida step for the state and its tangent vector.
    fn step(&self, s: &mut PhasePoint, v: &mut PhasePoint, h: f64) {
        let (a, b) = (W1 * h, W0 * h);
        self.kick(s, v, 0.5 * a);
        Self::drift(s, v, a);
        self.kick(s, v, 0.5 * (a + b));
        Self::drift(s, v, b);
        self.kick(s, v, 0.5 * (a + b));
        Self::drift(s, v, a);
        self.kick(s, v, 0.5 * a);
    }
}

fn outside(s: &PhasePoint, bounds: &Option<([f64; 2], [f64; 2])>) -> bool {
    match bounds {
        Some((lo, hi)) => !(s[0] >= lo[0] && s[0] <= hi[0] && s[1] >= lo[1] && s[1] <= hi[1]),
        None => !(s[0].is_finite() && s[1].is_finite()),
    }
}

/// Integrates `steps` steps of size `h` (negative runs backwards).
pub fn integrate(potential: &PotentialSpec, state0: PhasePoint, h: f64, steps: usize, opts: &IntegrateOptions) -> Result<Trajectory> {
    if !(h != 0.0 && h.is_finite()) {
        return Err(Error::domain("step must be finite and nonzero"));
    }
    if opts.renorm_interval == 0 {
        return Err(Error::domain("renormalization interval must be positive"));
    }
    let field = Field::new(potential)?;
    let stepper = Stepper { field: &field };
    let energy = field.energy(&state0);
    let scale = energy.abs().max(energy_scale(potential));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: PhasePoint = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let vn = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter_mut().for_each(|c| *c /= vn);

    let mut s = state0;
    let mut samples = vec![s];
    let mut log_growth = 0.0;
    let mut max_err = 0.0f64;
    let mut escaped = outside(&s, &opts.bounds);
    let mut taken = 0;
    while taken < steps && !escaped {
        stepper.step(&mut s, &mut v, h);
        taken += 1;
        if taken % opts.renorm_interval == 0 || taken == steps {
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            log_growth += n.ln();
            v.iter_mut().for_each(|c| *c /= n);
        }
        escaped = outside(&s, &opts.bounds);
        if opts.sample_stride > 0 && taken % opts.sample_stride == 0 || taken == steps || escaped {
            max_err = max_err.max((field.energy(&s) - energy).abs() / scale);
            samples.push(s);
        }
    }
    if taken % opts.renorm_interval != 0 && taken != steps {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        log_growth += n.ln();
    }
    let t = taken as f64 * h.abs();
    Ok(Trajectory {
        initial: state0,
        energy,
        h,
        steps: taken,
        sample_stride: opts.sample_stride,
        samples,
        max_energy_error: max_err,
        escaped,
        lyapunov: if t > 0.0 { log_growth / t } else { 0.0 },
    })
}

// ---------------------------------------------------------------------------
// Surfaces of section

/// The line `n·(q − origin) = 0` crossed with `n·p > 0`; points are
/// reported as `(t·(q − origin), t·p)` with `t = (n_y, −n_x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Section {
    pub origin: [f64; 2],
    pub normal: [f64; 2],
}

impl Section {
    /// `y = 0`, `ẏ > 0`, coordinate `(x, p_x)`.
    pub fn y_zero() -> Self {
        Self { origin: [0.0, 0.0], normal: [0.0, 1.0] }
    }

    /// Line through `point` along the ray from `center`; for a peripheral
    /// well this is its radial symmetry line.
    pub fn radial(center: [f64; 2], point: [f64; 2]) -> Result<Self> {
        let d = [point[0] - center[0], point[1] - center[1]];
        let r = d[0].hypot(d[1]);
        if !(r > 0.0) {
            return Err(Error::domain("radial section needs distinct points"));
        }
        Ok(Self { origin: point, normal: [-d[1] / r, d[0] / r] })
    }

    fn tangent(&self) -> [f64; 2] {
        [self.normal[1], -self.normal[0]]
    }

    /// Signed distance of a position from the line.
    pub fn offset(&self, q: [f64; 2]) -> f64 {
        self.normal[0] * (q[0] - self.origin[0]) + self.normal[1] * (q[1] - self.origin[1])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SosRecord {
    pub section: Section,
    pub trajectory: usize,
    pub points: Vec<[f64; 2]>,
    /// Largest `|n·(q − origin)|` at the interpolated points.
    pub max_offset: f64,
    pub lyapunov_estimate: f64,
    pub diagnostics: Vec<String>,
}

fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
}

/// Crossings of `traj` with `section`, located on the cubic Hermite
/// interpolant between stored samples (best with stride 1).
pub fn poincare_section(potential: &PotentialSpec, traj: &Trajectory, section: &Section, id: usize) -> Result<SosRecord> {
    let field = Field::new(potential)?;
    let stride = traj.sample_stride.max(1);
    let dt = traj.h * stride as f64;
    let n = section.normal;
    let t = section.tangent();
    let mut points = Vec::new();
    let mut max_offset = 0.0f64;
    for w in traj.samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fa = section.offset([a[0], a[1]]);
        let fb = section.offset([b[0], b[1]]);
        // orientation in physical time
        let (lo, hi) = if dt > 0.0 { (fa, fb) } else { (fb, fa) };
        if !(lo < 0.0 && hi >= 0.0) {
            continue;
        }
        let ma = dt * (n[0] * a[2] + n[1] * a[3]);
        let mb = dt * (n[0] * b[2] + n[1] * b[3]);
        let f = |s: f64| hermite(fa, fb, ma, mb, s);
        // bisection on the sign change, then Newton polish
        let (mut l, mut r) = (0.0, 1.0);
        for _ in 0..60 {
            let m = 0.5 * (l + r);
            if (f(m) < 0.0) == (fa < 0.0) {
                l = m;
            } else {
                r = m;
            }
        }
        let s = 0.5 * (l + r);
        let ga = field.gradient(a[0], a[1]);
        let gb = field.gradient(b[0], b[1]);
        let q: [f64; 2] = std::array::from_fn(|k| hermite(a[k], b[k], dt * a[k + 2], dt * b[k + 2], s));
        let p: [f64; 2] = std::array::from_fn(|k| hermite(a[k + 2], b[k + 2], -dt * ga[k], -dt * gb[k], s));
        if n[0] * p[0] + n[1] * p[1] <= 0.0 {
            continue;
        }
        max_offset = max_offset.max(section.offset(q).abs());
        let d = [q[0] - section.origin[0], q[1] - section.origin[1]];
        points.push([t[0] * d[0] + t[1] * d[1], t[0] * p[0] + t[1] * p[1]]);
    }
    let mut diagnostics = Vec::new();
    if points.is_empty() {
        diagnostics.push("trajectory never crosses the section".into());
    }
    Ok(SosRecord { section: *section, trajectory: id, points, max_offset, lyapunov_estimate: traj.lyapunov, diagnostics })
}

/// CSV with columns `s, p_s, trajectory`.
pub fn write_sos_csv<W: Write>(records: &[SosRecord], mut out: W) -> Result<()> {
    writeln!(out, "s,p_s,trajectory")?;
    for r in records {
        for p in &r.points {
            writeln!(out, "{:.15e},{:.15e},{}", p[0], p[1], r.trajectory)?;
        }
    }
    Ok(())
}

/// Lyapunov estimate of a finished trajectory.
pub fn regularity_estimate(traj: &Trajectory) -> f64 {
    traj.lyapunov
}

pub fn is_regular(estimate: f64, threshold: f64) -> bool {
    estimate < threshold
}

// ---------------------------------------------------------------------------
// Ensembles

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Well {
    pub label: String,
    pub minimum: [f64; 2],
}

/// Central and three peripheral QO wells (the latter only when they exist).
pub fn qo_wells(w: f64) -> Vec<Well> {
    let mut out = vec![Well { label: "central".into(), minimum: [0.0, 0.0] }];
    if let Some(r) = qo_peripheral_minimum(w) {
        for k in 0..3 {
            let th = 2.0 * PI * k as f64 / 3.0;
            out.push(Well { label: format!("peripheral-{k}"), minimum: [r * th.cos(), r * th.sin()] });
        }
    }
    out
}

/// The two D5 wells at `(±√(2b), 0)`.
pub fn d5_wells(b: f64) -> Vec<Well> {
    let x = (2.0 * b).sqrt();
    vec![
        Well { label: "left".into(), minimum: [-x, 0.0] },
        Well { label: "right".into(), minimum: [x, 0.0] },
    ]
}

/// Section used for a well: the radial line through a QO peripheral
/// minimum, `y = 0` otherwise.
pub fn default_section(potential: &PotentialSpec, well: &Well) -> Result<Section> {
    match potential {
        PotentialSpec::Qo { .. } if well.minimum[0].hypot(well.minimum[1]) > 0.0 => Section::radial([0.0, 0.0], well.minimum),
        _ => Ok(Section::y_zero()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub count: usize,
    pub seed: u64,
    /// Step as a fraction of the well's characteristic period.
    pub step_fraction: f64,
    pub duration: f64,
    /// Box searched for the classically allowed region of the well.
    pub bounds: ([f64; 2], [f64; 2]),
    pub raster: usize,
    pub threshold: f64,
}

impl EnsembleConfig {
    pub fn new(bounds: ([f64; 2], [f64; 2]), duration: f64) -> Self {
        Self { count: 32, seed: 1, step_fraction: 1e-3, duration, bounds, raster: 256, threshold: REGULARITY_THRESHOLD }
    }

    /// QO defaults: box covering all wells, `T = 2·10⁴`.
    pub fn qo(w: f64) -> Self {
        let r = qo_peripheral_minimum(w).unwrap_or(0.1) * 2.0;
        Self::new(([-r, -r], [r, r]), 2e4)
    }
}

/// Allowed region `U < E` connected to the well minimum, on a raster.
struct Basin {
    lo: [f64; 2],
    cell: [f64; 2],
    n: usize,
    inside: Vec<bool>,
}

impl Basin {
    fn new(field: &Field, well: &Well, energy: f64, cfg: &EnsembleConfig) -> Result<Self> {
        let n = cfg.raster.max(8);
        let (lo, hi) = cfg.bounds;
        let cell = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
        let allowed: Vec<bool> = (0..n * n)
            .map(|i| {
                let (ix, iy) = (i % n, i / n);
                field.value(lo[0] + (ix as f64 + 0.5) * cell[0], lo[1] + (iy as f64 + 0.5) * cell[1]) < energy
            })
            .collect();
        let cx = ((well.minimum[0] - lo[0]) / cell[0]).floor();
        let cy = ((well.minimum[1] - lo[1]) / cell[1]).floor();
        if !(cx >= 0.0 && cy >= 0.0 && (cx as usize) < n && (cy as usize) < n) {
            return Err(Error::domain(format!("well {} lies outside the search box", well.label)));
        }
        let start = cy as usize * n + cx as usize;
        if !allowed[start] {
            return Err(Error::domain(format!("E = {energy} is below the bottom of well {}", well.label)));
        }
        let mut inside = vec![false; n * n];
        let mut stack = vec![start];
        inside[start] = true;
        while let Some(i) = stack.pop() {
            let (ix, iy) = (i % n, i / n);
            if ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1 {
                return Err(Error::domain(format!("allowed region of well {} reaches the search box edge", well.label)));
            }
            for j in [i - 1, i + 1, i - n, i + n] {
                if allowed[j] && !inside[j] {
                    inside[j] = true;
                    stack.push(j);
                }
            }
        }
        Ok(Self { lo, cell, n, inside })
    }

    fn contains(&self, q: [f64; 2]) -> bool {
        let ix = ((q[0] - self.lo[0]) / self.cell[0]).floor();
        let iy = ((q[1] - self.lo[1]) / self.cell[1]).floor();
        ix >= 0.0 && iy >= 0.0 && (ix as usize) < self.n && (iy as usize) < self.n && self.inside[iy as usize * self.n + ix as usize]
    }

    fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (i, _) in self.inside.iter().enumerate().filter(|(_, b)| **b) {
            let c = [(i % self.n) as f64, (i / self.n) as f64];
            for k in 0..2 {
                lo[k] = lo[k].min(self.lo[k] + c[k] * self.cell[k]);
                hi[k] = hi[k].max(self.lo[k] + (c[k] + 1.0) * self.cell[k]);
            }
        }
        (lo, hi)
    }
}

/// Initial conditions on the energy shell inside one well: positions uniform
/// in the allowed region, momentum direction uniform.
pub fn seed_ensemble(potential: &PotentialSpec, well: &Well, energy: f64, cfg: &EnsembleConfig, stream: u64) -> Result<Vec<PhasePoint>> {
    let field = Field::new(potential)?;
    let basin = Basin::new(&field, well, energy, cfg)?;
    let (lo, hi) = basin.extent();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(cfg.count);
    let mut tries = 0usize;
    while out.len() < cfg.count {
        tries += 1;
        if tries > 1_000_000 {
            return Err(Error::Numerical(format!("rejection sampling in well {} did not converge", well.label)));
        }
        let q = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        let u = field.value(q[0], q[1]);
        if !(u < energy) || !basin.contains(q) {
            continue;
        }
        let p = (2.0 * (energy - u)).sqrt();
        let th = rng.random_range(0.0..2.0 * PI);
        out.push([q[0], q[1], p * th.cos(), p * th.sin()]);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub energy: f64,
    pub well: String,
    pub median: f64,
    pub estimates: Vec<f64>,
    pub regular_fraction: f64,
    pub escaped: usize,
    pub max_energy_error: f64,
}

/// Trajectories from [`seed_ensemble`], sampled every `sample_stride` steps
/// (0 keeps only the endpoints).
pub fn ensemble_trajectories(
    potential: &PotentialSpec,
    well: &Well,
    energy: f64,
    cfg: &EnsembleConfig,
    stream: u64,
    sample_stride: usize,
) -> Result<Vec<Trajectory>> {
    let ics = seed_ensemble(potential, well, energy, cfg, stream)?;
    let h = cfg.step_fraction * characteristic_period(potential, well.minimum)?;
    let steps = (cfg.duration / h).ceil() as usize;
    let opts = IntegrateOptions { sample_stride, bounds: Some(cfg.bounds), ..Default::default() };
    ics.par_iter()
        .enumerate()
        .map(|(i, s)| integrate(potential, *s, h, steps, &IntegrateOptions { seed: cfg.seed ^ (i as u64 + 1), ..opts }))
        .collect()
}

pub fn summarize_ensemble(energy: f64, well: &Well, runs: &[Trajectory], threshold: f64) -> EnsembleSummary {
    let estimates: Vec<f64> = runs.iter().map(regularity_estimate).collect();
    let mut sorted = estimates.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m == 0 { f64::NAN } else if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
    EnsembleSummary {
        energy,
        well: well.label.clone(),
        median,
        regular_fraction: estimates.iter().filter(|e| is_regular(**e, threshold)).count() as f64 / m.max(1) as f64,
        estimates,
        escaped: runs.iter().filter(|r| r.escaped).count(),
        max_energy_error: runs.iter().map(|r| r.max_energy_error).fold(0.0, f64::max),
    }
}

/// Lyapunov estimates for `cfg.count` trajectories seeded in `well`.
pub fn well_ensemble(potential: &PotentialSpec, well: &Well, energy: f64, cfg: &EnsembleConfig, stream: u64) -> Result<EnsembleSummary> {
    let runs = ensemble_trajectories(potential, well, energy, cfg, stream, 0)?;
    Ok(summarize_ensemble(energy, well, &runs, cfg.threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ho() -> PotentialSpec {
        PotentialSpec::Harmonic2D { omega_x: 1.0, omega_y: 1.0 }
    }

    #[test]
    fn circular_orbit_conserves_energy() {
        let h = 2.0 * PI * 1e-3;
        let t = integrate(&ho(), [1.0, 0.0, 0.0, 1.0], h, 1_000_000, &IntegrateOptions { sample_stride: 1000, ..Default::default() }).unwrap();
        assert!(t.max_energy_error < 1e-12, "{}", t.max_energy_error);
        for s in &t.samples {
            assert!((s[0].hypot(s[1]) - 1.0).abs() < 1e-9);
        }
        assert!(t.lyapunov < 1e-4);
    }

    #[test]
    fn fourth_order_phase_error() {
        // x(t) = cos t; error should drop 16× when h halves
        let err = |h: f64| {
            let n = (2.0 * PI / h).round() as usize;
            let t = integrate(&ho(), [1.0, 0.0, 0.0, 1.0], 2.0 * PI / n as f64, n, &IntegrateOptions::default()).unwrap();
            let s = t.final_state();
            ((s[0] - 1.0).powi(2) + s[1].powi(2)).sqrt()
        };
        let r = err(0.1) / err(0.05);
        assert!((r.log2() - 4.0).abs() < 0.2, "ratio {r}");
    }

    #[test]
    fn reversibility() {
        let qo = PotentialSpec::Qo { w: 18.0 };
        let s0 = [0.02, 0.01, 0.002, -0.003];
        let h = 0.01;
        let f = integrate(&qo, s0, h, 20_000, &IntegrateOptions { sample_stride: 0, ..Default::default() }).unwrap();
        let b = integrate(&qo, f.final_state(), -h, 20_000, &IntegrateOptions { sample_stride: 0, ..Default::default() }).unwrap();
        let e = b.final_state();
        for k in 0..4 {
            assert!((e[k] - s0[k]).abs() < 1e-9, "{e:?}");
        }
    }

    #[test]
    fn peripheral_orbit_librates_below_saddle() {
        let qo = PotentialSpec::Qo { w: 18.0 };
        let es = energy_scale(&qo);
        assert!((es - 1.0 / 20736.0).abs() < 1e-15);
        let well = &qo_wells(18.0)[1];
        let cfg = EnsembleConfig { count: 1, ..EnsembleConfig::qo(18.0) };
        let s0 = seed_ensemble(&qo, well, 0.3 * es, &cfg, 0).unwrap()[0];
        let h = 1e-3 * characteristic_period(&qo, well.minimum).unwrap();
        let t = integrate(&qo, s0, h, 200_000, &IntegrateOptions { sample_stride: 50, ..Default::default() }).unwrap();
        assert!(t.max_energy_error < 1e-8);
        // stays near (1/6, 0), on the far side of the saddle at 1/12
        assert!(t.samples.iter().all(|s| s[0] > 1.0 / 12.0));
    }

    #[test]
    fn d5_above_saddles_visits_both_wells() {
        let d5 = PotentialSpec::D5 { a: 2.0, b: 1.0 };
        let s0 = [-1.4, 0.0, (2.0 * (0.5 - d5.value_2d(-1.4, 0.0).unwrap())).sqrt(), 0.0];
        let t = integrate(&d5, s0, 1e-3, 50_000, &IntegrateOptions { sample_stride: 10, ..Default::default() }).unwrap();
        assert!(t.samples.iter().any(|s| s[0] < -1.0) && t.samples.iter().any(|s| s[0] > 1.0));
        assert!((t.energy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn isotropic_section_is_an_ellipse() {
        // E = (p_x² + x²)/2 + p_y²/2 at y = 0, with the y-energy fixed per orbit
        let s0 = [0.3, 0.2, 0.5, 0.7];
        let h = 2.0 * PI * 1e-3;
        let t = integrate(&ho(), s0, h, 100_000, &IntegrateOptions::default()).unwrap();
        let rec = poincare_section(&ho(), &t, &Section::y_zero(), 0).unwrap();
        assert!(rec.points.len() > 10);
        assert!(rec.max_offset < 1e-10);
        let ex = 0.5 * (s0[0] * s0[0] + s0[2] * s0[2]);
        for p in &rec.points {
            assert!((0.5 * (p[0] * p[0] + p[1] * p[1]) - ex).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_section_reports_diagnostic() {
        let t = integrate(&ho(), [1.0, 0.5, 0.0, 0.0], 0.01, 100, &IntegrateOptions::default()).unwrap();
        let rec = poincare_section(&ho(), &t, &Section { origin: [0.0, 5.0], normal: [0.0, 1.0] }, 3).unwrap();
        assert!(rec.points.is_empty());
        assert_eq!(rec.diagnostics.len(), 1);
    }

    #[test]
    fn escape_truncates() {
        let t = integrate(
            &ho(),
            [0.0, 0.0, 3.0, 0.0],
            0.01,
            10_000,
            &IntegrateOptions { bounds: Some(([-1.0, -1.0], [1.0, 1.0])), ..Default::default() },
        )
        .unwrap();
        assert!(t.escaped);
        assert!(t.steps < 10_000);
    }

    #[test]
    fn seeds_lie_on_shell_in_the_right_well() {
        let qo = PotentialSpec::Qo { w: 18.0 };
        let e = 0.75 * energy_scale(&qo);
        let cfg = EnsembleConfig::qo(18.0);
        for well in qo_wells(18.0) {
            let ics = seed_ensemble(&qo, &well, e, &cfg, 0).unwrap();
            assert_eq!(ics.len(), 32);
            for s in &ics {
                assert!((hamiltonian(&qo, s).unwrap() - e).abs() < 1e-16);
                let d = (s[0] - well.minimum[0]).hypot(s[1] - well.minimum[1]);
                assert!(d < 1.0 / 12.0);
            }
        }
        let again = seed_ensemble(&qo, &qo_wells(18.0)[0], e, &cfg, 0).unwrap();
        assert_eq!(again, seed_ensemble(&qo, &qo_wells(18.0)[0], e, &cfg, 0).unwrap());
    }

    #[test]
    fn radial_section_of_second_well() {
        let w = &qo_wells(18.0)[2];
        let s = Section::radial([0.0, 0.0], w.minimum).unwrap();
        assert!(s.offset(w.minimum).abs() < 1e-15);
        assert!(s.offset([0.0, 0.0]).abs() < 1e-15);
    }
}
