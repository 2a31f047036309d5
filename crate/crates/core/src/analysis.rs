//! Post-processing: nodal domains of real 2D states, level accuracy relative
//! to the local spacing, and the diagonalization vs spectral-method cost
//! benchmark with fitted scaling exponents.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diag::{assemble, band_eigen, dense_eigen, BasisFamily, BasisSpec};
use crate::error::{Error, Result};
use crate::grid::{Grid, Grid1D, Grid2D, WaveFunction};
use crate::potentials::PotentialSpec;
use crate::propagate::{evolve, find_peaks, gaussian_state, PropagationPlan, SpectrumOptions, Window};
use crate::spectrum::SpectrumResult;

// ---------------------------------------------------------------------------
// Nodal domains

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodalOptions {
    /// Nodes with `|ψ| < floor · max|ψ|` are left out of every domain.
    pub amplitude_floor: f64,
    /// Largest tolerated `|Im ψ| / max|ψ|`.
    pub imag_tol: f64,
}

impl Default for NodalOptions {
    fn default() -> Self {
        Self { amplitude_floor: 1e-6, imag_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NodalReport {
    pub nx: usize,
    pub ny: usize,
    pub domain_count: usize,
    /// Domain id per node, −1 outside the analysed region.
    pub labels: Vec<i64>,
    /// Sign per node (0 outside the region).
    pub signs: Vec<i8>,
    pub domain_sizes: Vec<usize>,
    /// `|ψ|²`-weighted domain centroids.
    pub centroids: Vec<[f64; 2]>,
    /// Unordered adjacent domain pairs `(a, b)`, `a < b`.
    pub adjacency: Vec<(usize, usize)>,
    /// Domains that do not touch the region boundary.
    pub interior: Vec<bool>,
    pub checkerboard_score: f64,
    /// `U < E` per node.
    pub allowed: Vec<bool>,
    /// Minimal distance between same-sign domains facing each other across
    /// a nodal crossing or avoided crossing.
    pub nodal_gaps: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl NodalReport {
    /// Sign raster and domain-id raster, one CSV row per y.
    pub fn write_rasters<W: Write, V: Write>(&self, mut signs: W, mut labels: V) -> Result<()> {
        for iy in 0..self.ny {
            let row = &self.signs[iy * self.nx..(iy + 1) * self.nx];
            writeln!(signs, "{}", row.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))?;
            let row = &self.labels[iy * self.nx..(iy + 1) * self.nx];
            writeln!(labels, "{}", row.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))?;
        }
        Ok(())
    }
}

/// Sign-based segmentation of a real state by 4-connected flood fill.
///
/// `region` restricts the analysis (e.g. to one well); nodes outside it and
/// nodes below the amplitude floor belong to no domain.
pub fn nodal_domains(
    psi: &WaveFunction,
    energy: f64,
    potential: &PotentialSpec,
    region: Option<&[bool]>,
    opts: &NodalOptions,
) -> Result<NodalReport> {
    let g = match psi.grid() {
        Grid::Two(g) => *g,
        Grid::One(_) => return Err(Error::domain("nodal analysis needs a 2D state")),
    };
    let vals = psi
        .real_parts(opts.imag_tol)
        .ok_or_else(|| Error::domain("state has a non-trivial phase; realify it first"))?;
    if let Some(r) = region {
        if r.len() != vals.len() {
            return Err(Error::GridMismatch("region mask size differs from the grid".into()));
        }
    }
    let (nx, ny) = (g.x.n_points, g.y.n_points);
    let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max > 0.0) {
        return Err(Error::domain("state vanishes"));
    }
    let neighbours = |i: usize| {
        let (ix, iy) = (i % nx, i / nx);
        let mut out = [None; 4];
        if ix > 0 {
            out[0] = Some(i - 1);
        }
        if ix + 1 < nx {
            out[1] = Some(i + 1);
        }
        if iy > 0 {
            out[2] = Some(i - nx);
        }
        if iy + 1 < ny {
            out[3] = Some(i + nx);
        }
        out
    };
    let inside = |i: usize| region.is_none_or(|r| r[i]);
    let active: Vec<bool> = (0..vals.len()).map(|i| inside(i) && vals[i].abs() >= opts.amplitude_floor * max).collect();
    // weak nodes next to strong ones sit on nodal lines, not in the tail
    let nodal: Vec<bool> = (0..vals.len())
        .map(|i| {
            let nb = neighbours(i);
            let has = |pos: bool| nb.into_iter().flatten().any(|j| active[j] && (vals[j] > 0.0) == pos);
            inside(i) && !active[i] && has(true) && has(false)
        })
        .collect();
    let signs: Vec<i8> = (0..vals.len()).map(|i| if active[i] { if vals[i] < 0.0 { -1 } else { 1 } } else { 0 }).collect();

    let mut labels = vec![-1i64; vals.len()];
    let mut sizes = Vec::new();
    let mut sums: Vec<[f64; 2]> = Vec::new();
    let mut touches = Vec::new();
    let mut domain_sign = Vec::new();
    for start in 0..vals.len() {
        if !active[start] || labels[start] >= 0 {
            continue;
        }
        let id = sizes.len() as i64;
        let mut stack = vec![start];
        labels[start] = id;
        let (mut size, mut sum, mut weight, mut edge) = (0usize, [0.0; 2], 0.0, false);
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = g.point(i % nx, i / nx);
            let w = vals[i] * vals[i];
            sum[0] += w * x;
            sum[1] += w * y;
            weight += w;
            let nb = neighbours(i);
            if nb.iter().any(|n| n.is_none_or(|j| !active[j] && !nodal[j])) {
                edge = true;
            }
            for j in nb.into_iter().flatten() {
                if active[j] && labels[j] < 0 && signs[j] == signs[i] {
                    labels[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
        sums.push([sum[0] / weight, sum[1] / weight]);
        touches.push(edge);
        domain_sign.push(signs[start]);
    }
    let count = sizes.len();
    let mut adj = BTreeSet::new();
    for i in 0..vals.len() {
        if labels[i] >= 0 {
            for j in [i + 1, i + nx] {
                if j < vals.len() && (j != i + 1 || (i + 1) % nx != 0) && labels[j] >= 0 && labels[j] != labels[i] {
                    let (a, b) = (labels[i] as usize, labels[j] as usize);
                    adj.insert((a.min(b), a.max(b)));
                }
            }
        } else if nodal[i] {
            // domains meeting across a node that lies on the nodal line
            let ids: Vec<i64> = neighbours(i).into_iter().flatten().map(|j| labels[j]).filter(|l| *l >= 0).collect();
            for (k, &a) in ids.iter().enumerate() {
                for &b in &ids[k + 1..] {
                    if a != b && domain_sign[a as usize] != domain_sign[b as usize] {
                        let (a, b) = (a as usize, b as usize);
                        adj.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
    }
    let adjacency: Vec<(usize, usize)> = adj.into_iter().collect();
    let interior: Vec<bool> = touches.iter().map(|t| !t).collect();
    let mut diagnostics = Vec::new();
    let checkerboard_score = checkerboard(&sums, &adjacency, &interior, &mut diagnostics);
    let allowed = (0..vals.len())
        .map(|i| {
            let (x, y) = g.point(i % nx, i / nx);
            potential.value_2d(x, y).map(|u| u < energy)
        })
        .collect::<Result<Vec<_>>>()?;
    let nodal_gaps = crossing_gaps(&g, &labels, &signs, count, &adjacency);
    if count == 0 {
        diagnostics.push("no nodes above the amplitude floor".into());
    }
    Ok(NodalReport {
        nx,
        ny,
        domain_count: count,
        labels,
        signs,
        domain_sizes: sizes,
        centroids: sums,
        adjacency,
        interior,
        checkerboard_score,
        allowed,
        nodal_gaps,
        diagnostics,
    })
}

/// Fraction of adjacency pairs `(D, D')` with `D` interior for which `D`
/// also has a neighbour roughly opposite to `D'` and a neighbour in a second,
/// independent direction: what a lattice tiling of domains looks like.
fn checkerboard(centroids: &[[f64; 2]], adjacency: &[(usize, usize)], interior: &[bool], diag: &mut Vec<String>) -> f64 {
    let mut nbrs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in adjacency {
        nbrs.entry(a).or_default().push(b);
        nbrs.entry(b).or_default().push(a);
    }
    let (mut total, mut good) = (0usize, 0usize);
    for (d, list) in &nbrs {
        if !interior[*d] {
            continue;
        }
        let c = centroids[*d];
        let vecs: Vec<[f64; 2]> = list.iter().map(|n| [centroids[*n][0] - c[0], centroids[*n][1] - c[1]]).collect();
        for (k, v) in vecs.iter().enumerate() {
            total += 1;
            let lv = v[0].hypot(v[1]);
            let mut opposite = false;
            let mut across = false;
            for (m, u) in vecs.iter().enumerate() {
                if m == k {
                    continue;
                }
                let lu = u[0].hypot(u[1]);
                let cos = (v[0] * u[0] + v[1] * u[1]) / (lv * lu);
                let ratio = lu / lv;
                if cos < -0.9 && (0.5..=2.0).contains(&ratio) {
                    opposite = true;
                }
                if cos.abs() < 0.5 {
                    across = true;
                }
            }
            if opposite && across {
                good += 1;
            }
        }
    }
    if total == 0 {
        diag.push("no interior domains; checkerboard score set to 0".into());
        return 0.0;
    }
    good as f64 / total as f64
}

/// For same-sign domain pairs sharing at least two opposite-sign neighbours,
/// the smallest node-to-node distance between them.
fn crossing_gaps(g: &Grid2D, labels: &[i64], signs: &[i8], count: usize, adjacency: &[(usize, usize)]) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    let nx = g.x.n_points;
    let mut nbrs = vec![BTreeSet::new(); count];
    for &(a, b) in adjacency {
        nbrs[a].insert(b);
        nbrs[b].insert(a);
    }
    let mut sign = vec![0i8; count];
    let mut boundary: Vec<Vec<[f64; 2]>> = vec![Vec::new(); count];
    for i in 0..labels.len() {
        if labels[i] < 0 {
            continue;
        }
        let d = labels[i] as usize;
        sign[d] = signs[i];
        let (ix, iy) = (i % nx, i / nx);
        let edge = [(ix > 0).then(|| i - 1), (ix + 1 < nx).then(|| i + 1), (iy > 0).then(|| i - nx), (i + nx < labels.len()).then(|| i + nx)]
            .into_iter()
            .flatten()
            .any(|j| labels[j] >= 0 && labels[j] != labels[i]);
        if edge {
            let (x, y) = g.point(ix, iy);
            boundary[d].push([x, y]);
        }
    }
    let mut gaps = Vec::new();
    for a in 0..count {
        for b in a + 1..count {
            if sign[a] != sign[b] || nbrs[a].intersection(&nbrs[b]).count() < 2 {
                continue;
            }
            let mut best = f64::INFINITY;
            for p in &boundary[a] {
                for q in &boundary[b] {
                    best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
                }
            }
            if best.is_finite() {
                gaps.push(best);
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps
}

/// Runs the analysis on `grid` and on the grid with twice the nodes per
/// axis; refuses the report if the domain count changes.
pub fn nodal_domains_refined(
    eval: impl Fn(Grid2D) -> Result<WaveFunction>,
    grid: Grid2D,
    energy: f64,
    potential: &PotentialSpec,
    region: Option<&dyn Fn(f64, f64) -> bool>,
    opts: &NodalOptions,
) -> Result<NodalReport> {
    let run = |g: Grid2D| -> Result<NodalReport> {
        let psi = eval(g)?;
        let mask: Option<Vec<bool>> = region.map(|f| {
            (0..g.len())
                .map(|i| {
                    let (x, y) = g.point(i % g.x.n_points, i / g.x.n_points);
                    f(x, y)
                })
                .collect()
        });
        nodal_domains(&psi, energy, potential, mask.as_deref(), opts)
    };
    let coarse = run(grid)?;
    let fine_grid = Grid2D::new(
        Grid1D { n_points: 2 * grid.x.n_points, ..grid.x },
        Grid1D { n_points: 2 * grid.y.n_points, ..grid.y },
    );
    let fine = run(fine_grid)?;
    if coarse.domain_count != fine.domain_count {
        return Err(Error::Numerical(format!(
            "domain count not converged under refinement: {} vs {}",
            coarse.domain_count, fine.domain_count
        )));
    }
    Ok(fine)
}

// ---------------------------------------------------------------------------
// Level accuracy

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelAccuracy {
    pub index: usize,
    pub energy: f64,
    pub reference: f64,
    pub spacing: f64,
    pub epsilon: f64,
    pub matched: bool,
}

/// Mean of up to five reference spacings centred on level `j`.
fn local_spacing(reference: &[f64], j: usize) -> f64 {
    let m = reference.len();
    if m < 2 {
        return f64::NAN;
    }
    let gaps = m - 1;
    let lo = j.saturating_sub(2).min(gaps.saturating_sub(5.min(gaps)));
    let hi = (lo + 5).min(gaps);
    (reference[hi] - reference[lo]) / (hi - lo) as f64
}

/// `|ΔE|` over the local mean spacing for each computed level, matched to
/// the nearest reference level.
pub fn unfolded_accuracy(computed: &SpectrumResult, reference: &SpectrumResult) -> Result<Vec<LevelAccuracy>> {
    let r = reference.energies();
    let c = computed.energies();
    if r.len() < 2 {
        return Err(Error::domain("reference needs at least two levels"));
    }
    if r.windows(2).any(|w| w[1] < w[0]) || c.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("spectra must be ascending"));
    }
    Ok(c.iter()
        .enumerate()
        .map(|(index, &e)| {
            let j = nearest(&r, e);
            let spacing = local_spacing(&r, j);
            let delta = (e - r[j]).abs();
            LevelAccuracy { index, energy: e, reference: r[j], spacing, epsilon: delta / spacing, matched: delta <= 0.5 * spacing }
        })
        .collect())
}

fn nearest(sorted: &[f64], e: f64) -> usize {
    let k = sorted.partition_point(|x| *x < e);
    if k == 0 {
        0
    } else if k == sorted.len() || e - sorted[k - 1] <= sorted[k] - e {
        k - 1
    } else {
        k
    }
}

/// Number of matched levels with `ε < threshold`.
pub fn accurate_count(acc: &[LevelAccuracy], threshold: f64) -> usize {
    acc.iter().filter(|a| a.matched && a.epsilon < threshold).count()
}

/// Largest `ε` over the lowest `n` reference levels, taking for each the
/// nearest computed level; `None` if one of them has no match.
pub fn worst_epsilon(computed: &[f64], reference: &[f64], n: usize) -> Option<f64> {
    if computed.is_empty() || reference.len() < 2 {
        return None;
    }
    let mut worst = 0.0f64;
    for j in 0..n.min(reference.len()) {
        let e = computed[nearest(computed, reference[j])];
        let s = local_spacing(reference, j);
        let d = (e - reference[j]).abs();
        if d > 0.5 * s {
            return None;
        }
        worst = worst.max(d / s);
    }
    Some(worst)
}

// ---------------------------------------------------------------------------
// Scaling fits

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::domain("need at least two paired samples"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::domain("log-log fit needs positive data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("abscissae are all equal"));
    }
    Ok(sxy / sxx)
}

/// Exponent `a` of `ρ(E) ∝ (E − E_0)^a` from the level staircase.
pub fn fit_density_exponent(levels: &[f64], e0: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> =
        levels.iter().enumerate().filter(|(_, e)| **e > e0).map(|(k, e)| (e - e0, k as f64 + 0.5)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Ok(fit_exponent(&xs, &ys)? - 1.0)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Median wall time of `repeats` calls.
pub fn time_median<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let mut t = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let s = Instant::now();
        std::hint::black_box(f()?);
        t.push(s.elapsed().as_secs_f64());
    }
    Ok(median(t))
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

/// Median eigenvalue-only dense solve times for random symmetric matrices.
pub fn dense_solve_times(sizes: &[usize], repeats: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sizes
        .iter()
        .map(|&n| {
            let a = random_symmetric(n, &mut rng);
            time_median(repeats, || dense_eigen(n, &a, false))
        })
        .collect()
}

/// Median banded solve times (eigenvalues only) for random band matrices.
pub fn banded_solve_times(sizes: &[usize], bandwidth: usize, repeats: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sizes
        .iter()
        .map(|&n| {
            let band: Vec<f64> = (0..n * (bandwidth + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
            time_median(repeats, || band_eigen(n, bandwidth, &band, false))
        })
        .collect()
}

/// Median propagation times for the given step counts.
pub fn propagation_times(plan: &PropagationPlan, psi0: &WaveFunction, steps: &[usize], repeats: usize) -> Result<Vec<f64>> {
    steps
        .iter()
        .map(|&n| {
            let p = plan.with_steps(n)?;
            time_median(repeats, || evolve(psi0, &p))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cost benchmark

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMethod {
    DenseMd,
    BandedMd,
    Spectral,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostRecord {
    pub method: CostMethod,
    pub n_levels: usize,
    /// Basis size for MD, number of time steps for SM.
    pub resource: usize,
    pub epsilon: f64,
    pub wall_time: f64,
    /// Estimated working set of the dominant arrays, bytes.
    pub memory_bytes: usize,
    /// Target not reached within the resource cap.
    pub capped: bool,
}

impl CostRecord {
    pub fn csv_header() -> &'static str {
        "method,n_levels,resource,epsilon,wall_time_s,memory_bytes,capped"
    }

    pub fn csv_row(&self) -> String {
        let m = match self.method {
            CostMethod::DenseMd => "dense-md",
            CostMethod::BandedMd => "banded-md",
            CostMethod::Spectral => "spectral",
        };
        format!("{m},{},{},{:.6e},{:.6e},{},{}", self.n_levels, self.resource, self.epsilon, self.wall_time, self.memory_bytes, self.capped)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostConfig {
    /// Oscillator basis frequency and centre.
    pub omega: f64,
    pub center: f64,
    pub n_max: usize,
    /// Grid and packet for the spectral method.
    pub grid: Grid1D,
    pub packet_center: f64,
    pub packet_width: f64,
    pub min_exponent: u32,
    pub max_exponent: u32,
    pub repeats: usize,
    /// Force the dense route for MD.
    pub dense: bool,
}

impl CostConfig {
    pub fn new(omega: f64, grid: Grid1D, packet_center: f64, packet_width: f64) -> Self {
        Self {
            omega,
            center: 0.0,
            n_max: 400,
            grid,
            packet_center,
            packet_width,
            min_exponent: 10,
            max_exponent: 20,
            repeats: 5,
            dense: false,
        }
    }
}

/// Smallest basis size and smallest record length reaching `eps_target` on
/// the lowest `n` levels of `reference`, with timings.
pub fn cost_benchmark(
    potential: &PotentialSpec,
    n: usize,
    eps_target: f64,
    reference: &[f64],
    cfg: &CostConfig,
) -> Result<(CostRecord, CostRecord)> {
    if reference.len() < n.max(2) {
        return Err(Error::domain("reference spectrum shorter than the requested level count"));
    }
    Ok((md_cost(potential, n, eps_target, reference, cfg)?, sm_cost(potential, n, eps_target, reference, cfg)?))
}

fn md_cost(potential: &PotentialSpec, n: usize, eps: f64, reference: &[f64], cfg: &CostConfig) -> Result<CostRecord> {
    let solve = |size: usize| -> Result<(Vec<f64>, bool, usize)> {
        let basis = BasisSpec::new(BasisFamily::Ho1d { omega: cfg.omega }, size).with_center(cfg.center, 0.0);
        let mut h = assemble(potential, &basis)?;
        if cfg.dense && h.is_banded() {
            h = crate::diag::HamiltonianMatrix::from_dense(size, h.to_dense())?;
        }
        let banded = h.is_banded();
        let bw = h.bandwidth();
        Ok((h.eigen_lowest(n.min(size), false)?.energies(), banded, bw))
    };
    let mut size = n.max(2);
    loop {
        let (levels, banded, bw) = solve(size)?;
        let got = if levels.len() >= n { worst_epsilon(&levels, reference, n) } else { None };
        let capped = size >= cfg.n_max;
        if got.is_some_and(|e| e <= eps) || capped {
            let wall = time_median(cfg.repeats, || solve(size))?;
            let memory = if banded { size * (bw + 1) * 8 } else { size * size * 8 };
            return Ok(CostRecord {
                method: if banded { CostMethod::BandedMd } else { CostMethod::DenseMd },
                n_levels: n,
                resource: size,
                epsilon: got.unwrap_or(f64::INFINITY),
                wall_time: wall,
                memory_bytes: memory,
                capped: !got.is_some_and(|e| e <= eps),
            });
        }
        size = (size + size.div_ceil(8)).min(cfg.n_max);
    }
}

fn sm_cost(potential: &PotentialSpec, n: usize, eps: f64, reference: &[f64], cfg: &CostConfig) -> Result<CostRecord> {
    let psi = gaussian_state(cfg.grid, &[cfg.packet_center], &[cfg.packet_width])?;
    let base = PropagationPlan::auto(cfg.grid, potential, cfg.min_exponent, 1.0)?;
    let hi = reference[n - 1] + local_spacing(reference, n - 1);
    let lo = reference[0] - local_spacing(reference, 0);
    let opts = SpectrumOptions::new(Window::Hann).range(lo, hi);
    let mut m = cfg.min_exponent;
    loop {
        let plan = base.with_steps(1 << m)?;
        let run = || -> Result<Vec<f64>> {
            let p = evolve(&psi, &plan)?;
            Ok(find_peaks(&p, &opts)?.into_iter().map(|pk| pk.energy).collect())
        };
        let levels = run()?;
        let got = worst_epsilon(&levels, reference, n);
        let capped = m >= cfg.max_exponent;
        if got.is_some_and(|e| e <= eps) || capped {
            let wall = time_median(cfg.repeats, run)?;
            return Ok(CostRecord {
                method: CostMethod::Spectral,
                n_levels: n,
                resource: 1 << m,
                epsilon: got.unwrap_or(f64::INFINITY),
                wall_time: wall,
                // state, initial state, two phase tables, autocorrelation
                memory_bytes: cfg.grid.n_points * 16 * 4 + (1usize << m) * 16,
                capped: !got.is_some_and(|e| e <= eps),
            });
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::oscillator_function;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn ho_state(nx: usize, ny: usize, g: Grid2D) -> WaveFunction {
        WaveFunction::from_fn_2d(g, |x, y| Complex64::new(oscillator_function(nx, x, 1.0) * oscillator_function(ny, y, 1.0), 0.0))
    }

    fn ho2() -> PotentialSpec {
        PotentialSpec::Harmonic2D { omega_x: 1.0, omega_y: 1.0 }
    }

    #[test]
    fn separable_counts_are_products() {
        let g = Grid2D::square(8.0, 7).unwrap();
        for (nx, ny) in [(0, 0), (3, 2), (1, 4), (2, 2)] {
            let r = nodal_domains(&ho_state(nx, ny, g), nx as f64 + ny as f64 + 1.0, &ho2(), None, &NodalOptions::default()).unwrap();
            assert_eq!(r.domain_count, (nx + 1) * (ny + 1), "({nx},{ny})");
        }
    }

    #[test]
    fn separable_state_is_a_checkerboard() {
        let g = Grid2D::square(8.0, 7).unwrap();
        let r = nodal_domains(&ho_state(3, 2, g), 6.0, &ho2(), None, &NodalOptions::default()).unwrap();
        assert!(r.checkerboard_score > 0.9, "{}", r.checkerboard_score);
        // two interior domains with four neighbours each
        assert_eq!(r.interior.iter().filter(|b| **b).count(), 2);
        // true crossings: gaps of order one grid step
        assert!(!r.nodal_gaps.is_empty());
        assert!(r.nodal_gaps.iter().all(|d| *d < 3.0 * g.x.dx()), "{:?}", r.nodal_gaps);
        let covered = r.labels.iter().filter(|l| **l >= 0).count();
        assert_eq!(covered, r.domain_sizes.iter().sum::<usize>());
    }

    #[test]
    fn refinement_keeps_count() {
        let g = Grid2D::square(6.0, 6).unwrap();
        let r = nodal_domains_refined(|g| Ok(ho_state(3, 2, g)), g, 6.0, &ho2(), None, &NodalOptions::default()).unwrap();
        assert_eq!(r.domain_count, 12);
        assert_eq!(r.nx, 128);
    }

    #[test]
    fn complex_state_rejected() {
        let g = Grid2D::square(4.0, 5).unwrap();
        let psi = WaveFunction::from_fn_2d(g, Complex64::new);
        assert!(matches!(nodal_domains(&psi, 1.0, &ho2(), None, &NodalOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn region_mask_restricts() {
        let g = Grid2D::square(6.0, 7).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|i| g.point(i % 128, i / 128).0 > 0.1).collect();
        let r = nodal_domains(&ho_state(3, 0, g), 3.5, &ho2(), Some(&mask), &NodalOptions::default()).unwrap();
        assert_eq!(r.domain_count, 2);
        assert!(r.allowed[g.index(64, 64)]);
    }

    #[test]
    fn raster_shape() {
        let g = Grid2D::square(4.0, 5).unwrap();
        let r = nodal_domains(&ho_state(1, 1, g), 3.0, &ho2(), None, &NodalOptions::default()).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        r.write_rasters(&mut a, &mut b).unwrap();
        let a = String::from_utf8(a).unwrap();
        assert_eq!(a.lines().count(), 32);
        assert_eq!(a.lines().next().unwrap().split(',').count(), 32);
    }

    fn ho_levels(k: usize, shift: f64) -> SpectrumResult {
        let e: Vec<f64> = (0..k).map(|n| n as f64 + 0.5 + shift).collect();
        SpectrumResult::from_energies(&e, 0.0, crate::spectrum::Method::Exact)
    }

    #[test]
    fn unfolding_examples() {
        let r = ho_levels(20, 0.0);
        assert!(unfolded_accuracy(&r, &r).unwrap().iter().all(|a| a.epsilon == 0.0 && a.matched));
        let acc = unfolded_accuracy(&ho_levels(20, 1e-3), &r).unwrap();
        assert!(acc.iter().all(|a| (a.epsilon - 1e-3).abs() < 1e-12));
        let far = SpectrumResult::from_energies(&[-5.0, 1.6], 0.0, crate::spectrum::Method::Exact);
        let far = unfolded_accuracy(&far, &r).unwrap();
        assert!(!far[0].matched && far[1].matched);
        assert!((far[1].epsilon - 0.1).abs() < 1e-12);
        assert_eq!(accurate_count(&acc, 0.01), 20);
        let w = worst_epsilon(&ho_levels(5, 2e-3).energies(), &r.energies(), 5).unwrap();
        assert!((w - 2e-3).abs() < 1e-12);
        assert_eq!(worst_epsilon(&[0.5, 1.5], &r.energies(), 5), None);
    }

    proptest! {
        #[test]
        fn unfolding_is_affine_invariant(a in 0.1f64..10.0, b in -50.0f64..50.0, d in 0.0f64..0.3) {
            let r = ho_levels(15, 0.0);
            let c = ho_levels(15, d);
            let base = unfolded_accuracy(&c, &r).unwrap();
            let map = |s: &SpectrumResult| {
                let e: Vec<f64> = s.energies().iter().map(|x| a * x + b).collect();
                SpectrumResult::from_energies(&e, 0.0, crate::spectrum::Method::Exact)
            };
            let moved = unfolded_accuracy(&map(&c), &map(&r)).unwrap();
            for (u, v) in base.iter().zip(&moved) {
                prop_assert!((u.epsilon - v.epsilon).abs() < 1e-12 * (1.0 + b.abs() / a));
            }
        }
    }

    #[test]
    fn exponent_fits() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        assert!((fit_exponent(&xs, &ys).unwrap() - 3.0).abs() < 1e-12);
        // HO: N(E) = E, so ρ is flat
        let lv: Vec<f64> = (0..50).map(|n| n as f64 + 0.5).collect();
        assert!(fit_density_exponent(&lv, 0.0).unwrap().abs() < 0.05);
    }

    #[test]
    fn oscillator_cost_is_trivial() {
        let pot = PotentialSpec::Harmonic { omega: 1.0 };
        let reference: Vec<f64> = (0..30).map(|n| n as f64 + 0.5).collect();
        let g = Grid1D::symmetric(10.0, 7).unwrap();
        let mut cfg = CostConfig::new(1.0, g, 10f64.sqrt(), 1.0);
        cfg.repeats = 1;
        let (md, sm) = cost_benchmark(&pot, 10, 0.01, &reference, &cfg).unwrap();
        assert!(!md.capped && md.resource <= 12, "{md:?}");
        assert!(md.epsilon < 1e-10);
        assert!(!sm.capped && sm.epsilon <= 0.01, "{sm:?}");
    }
}
