use std::io::Write;

use anyhow::{anyhow, bail, Result};
use multiwell::analysis::{
    banded_solve_times, cost_benchmark, dense_solve_times, fit_exponent, nodal_domains, propagation_times, CostConfig, CostRecord,
    NodalOptions,
};
use multiwell::classical::{
    d5_wells, default_section, energy_scale, ensemble_trajectories, poincare_section, qo_wells, summarize_ensemble, write_sos_csv,
    EnsembleConfig,
};
use multiwell::diag::{assemble, grid_eigen_1d, BasisFamily, BasisSpec};
use multiwell::grid::{Grid1D, Grid2D, WaveFunction};
use multiwell::potentials::{find_critical_points, qo_peripheral_minimum, CriticalKind, PotentialConfig, PotentialSpec};
use multiwell::propagate::{evolve, extract_spectrum, gaussian_state, spectral_density, PropagationPlan, SpectrumOptions};
use multiwell::specfun::oscillator_function;
use multiwell::susy::{build_model, default_grid, LevelOrigin, SolvableModel, SusyParams};
use num_complex::Complex64;
use serde_json::json;

use crate::config::{Command, ExperimentConfig, GridConfig, Solver};
use crate::output::RunDir;

pub fn run(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<()> {
    match cfg.command {
        Command::SusyGen => susy_gen(cfg, out),
        Command::Diag => diag(cfg, out),
        Command::Spectral => spectral(cfg, out),
        Command::Poincare => poincare(cfg, out),
        Command::Nodal => nodal(cfg, out),
        Command::Bench => bench(cfg, out),
        Command::CriticalPoints => critical_points(cfg, out),
    }
}

fn grid_or(cfg: &ExperimentConfig, half_width: f64, log2_points: u32) -> GridConfig {
    cfg.grid.unwrap_or(GridConfig { half_width, log2_points })
}

fn grid_1d(g: GridConfig) -> Result<Grid1D> {
    Ok(Grid1D::symmetric(g.half_width, g.log2_points)?)
}

fn origin_label(o: &LevelOrigin) -> String {
    match o {
        LevelOrigin::AddedLower => "added-lower".into(),
        LevelOrigin::Added => "added".into(),
        LevelOrigin::Oscillator(n) => format!("oscillator-{n}"),
    }
}

fn write_model(out: &mut RunDir, name: &str, model: &SolvableModel, levels: &mut impl Write) -> Result<()> {
    model.write_csv(out.file(&format!("{name}.csv"))?)?;
    for (i, (l, r)) in model.levels.iter().zip(model.residuals()).enumerate() {
        writeln!(levels, "{name},{i},{:.17e},{},{r:.3e}", l.energy, origin_label(&l.origin))?;
    }
    out.note(format!("{name}: {:?}, {} levels", model.family, model.levels.len()));
    Ok(())
}

fn susy_gen(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<()> {
    let params = cfg.potential.susy_params().ok_or_else(|| anyhow!("susy-gen needs a potential of kind `susy`"))?;
    let grid = match cfg.grid {
        Some(g) => grid_1d(g)?,
        None => default_grid(params.omega)?,
    };
    let mut levels = out.file("levels.csv")?;
    writeln!(levels, "model,index,energy,origin,residual")?;
    let mut descriptors = Vec::new();
    if params.is_triple() {
        // the double well sharing ν and Λ is drawn alongside the triple well
        let PotentialConfig::Susy { nu, lambda, omega, .. } = cfg.potential else { unreachable!() };
        let double = build_model(&SusyParams::double_well(nu, lambda).with_omega(omega), &grid, cfg.method.n_states)?;
        write_model(out, "double_well", &double, &mut levels)?;
        descriptors.push(double.descriptor());
        let triple = build_model(&params, &grid, cfg.method.n_states)?;
        write_model(out, "triple_well", &triple, &mut levels)?;
        descriptors.push(triple.descriptor());
    } else {
        let double = build_model(&params, &grid, cfg.method.n_states)?;
        write_model(out, "double_well", &double, &mut levels)?;
        descriptors.push(double.descriptor());
    }
    levels.flush()?;
    out.json("models.json", &descriptors)
}

fn diag(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<()> {
    let pot = cfg.potential.build()?;
    let m = &cfg.method;
    let spectrum = match (m.solver, pot.dims()) {
        (Solver::Grid, 1) => {
            let g = grid_1d(grid_or(cfg, 10.0, 11))?;
            out.note(format!("grid solver, {} nodes", g.n_points));
            grid_eigen_1d(&pot, &g, m.n_levels, m.hbar, 1e-10)?
        }
        (Solver::Grid, _) => bail!("the grid solver is one-dimensional"),
        (Solver::Basis, d) => {
            let omega = m.basis_omega.unwrap_or(1.0);
            let family = if d == 1 { BasisFamily::Ho1d { omega } } else { BasisFamily::HoProduct2d { omega_x: omega, omega_y: omega } };
            let n = m.basis_size.unwrap_or(if d == 1 { 60 } else { 400 });
            let basis = |n| BasisSpec::new(family, n).with_hbar(m.hbar).with_center(m.center[0], m.center[1]);
            let h = assemble(&pot, &basis(n))?;
            out.note(format!("basis {family:?}, N = {n}, banded = {}", h.is_banded()));
            let s = h.eigen_lowest(m.n_levels, false)?;
            // truncation estimate from a smaller basis
            let small = assemble(&pot, &basis(n * 3 / 4))?.eigen_lowest(m.n_levels, false)?;
            let mut conv = out.file("convergence.csv")?;
            writeln!(conv, "index,energy,energy_small_basis,difference")?;
            for (i, (a, b)) in s.energies().iter().zip(small.energies()).enumerate() {
                writeln!(conv, "{i},{a:.17e},{b:.17e},{:.3e}", (a - b).abs())?;
            }
            s
        }
    };
    spectrum.write_csv(out.file("levels.csv")?)?;
    out.note(format!("{} levels", spectrum.len()));
    Ok(())
}

fn packet(cfg: &ExperimentConfig, dims: usize) -> (Vec<f64>, Vec<f64>) {
    let m = &cfg.method;
    let c = if m.packet_center.len() == dims { m.packet_center.clone() } else { vec![0.5; dims] };
    let w = if m.packet_width.len() == dims { m.packet_width.clone() } else { vec![1.0; dims] };
    (c, w)
}

fn spectral(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<()> {
    let pot = cfg.potential.build()?;
    let m = &cfg.method;
    let d = pot.dims();
    let gc = grid_or(cfg, if d == 1 { 8.0 } else { 4.0 }, if d == 1 { 7 } else { 6 });
    let (center, width) = packet(cfg, d);
    let (plan, psi) = if d == 1 {
        let g = grid_1d(gc)?;
        (PropagationPlan::auto(g, &pot, m.exponent, m.hbar)?, gaussian_state(g, &center, &width)?)
    } else {
        let g = Grid2D::square(gc.half_width, gc.log2_points)?;
        (PropagationPlan::auto(g, &pot, m.exponent, m.hbar)?, gaussian_state(g, &center, &width)?)
    };
    out.note(format!("dt = {:.6e}, {} steps, T = {:.6e}", plan.dt(), plan.n_steps(), plan.total_time()));
    let p = evolve(&psi, &plan)?;
    p.write_csv(out.file("autocorrelation.csv")?)?;
    let mut opts = SpectrumOptions::new(m.window);
    if let (Some(lo), Some(hi)) = (m.e_min, m.e_max) {
        opts = opts.range(lo, hi);
    }
    let s = extract_spectrum(&p, &opts)?;
    s.write_csv(out.file("levels.csv")?)?;
    out.note(format!("{} peaks", s.len()));
    let e = s.energies();
    let t = p.total_time();
    let lo = m.e_min.or(e.first().map(|x| x - 1.0)).unwrap_or(0.0);
    let hi = m.e_max.or(e.last().map(|x| x + 1.0)).unwrap_or(1.0);
    let n = (((hi - lo) * t / (0.1 * m.hbar)).ceil() as usize).clamp(2, 1 << 14);
    let grid: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let dens = spectral_density(&p, m.window, &grid);
    let mut f = out.file("density.csv")?;
    writeln!(f, "energy,density")?;
    for (x, y) in grid.iter().zip(dens) {
        writeln!(f, "{x:.17e},{y:.17e}")?;
    }
    Ok(())
}

fn poincare(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<()> {
    let pot = cfg.potential.build()?;
    let m = &cfg.method;
    let (wells, mut ens) = match cfg.potential {
        PotentialConfig::Qo { w } => {
            let labels = if m.wells.is_empty() { vec!["central".to_string(), "peripheral-0".to_string()] } else { m.wells.clone() };
            (pick(qo_wells(w), &labels)?, EnsembleConfig::qo(w))
        }
        PotentialConfig::D5 { b, .. } => {
            let r = 3.0 * (2.0 * b).sqrt();
            let labels = if m.wells.is_empty() { vec!["left".to_string(), "right".to_string()] } else { m.wells.clone() };
            (pick(d5_wells(b), &labels)?, EnsembleConfig::new(([-r, -r], [r, r]), 2e3))
        }
        _ => bail!("poincare supports the qo and d5 potentials"),
    };
    ens.count = m.trajectories;
    ens.seed = cfg.seed;
    if let Some(t) = m.duration {
        ens.duration = t;
    }
    let energy = m.energy_frac * energy_scale(&pot);
    out.note(format!("E = {energy:.6e}, {} trajectories per well, T = {}", ens.count, ens.duration));
    let mut summaries = Vec::new();
    for (stream, well) in wells {
        let runs = ensemble_trajectories(&pot, &well, energy, &ens, stream, m.sample_stride.max(1))?;
        let section = default_section(&pot, &well)?;
        let records = runs.iter().enumerate().map(|(i, t)| poincare_section(&pot, t, &section, i)).collect::<multiwell::Result<Vec<_>>>()?;
        write_sos_csv(&records, out.file(&format!("sos-{}.csv", well.label))?)?;
        let s = summarize_ensemble(energy, &well, &runs, ens.threshold);
        out.note(format!("{}: median estimate {:.3e}, regular fraction {:.2}", well.label, s.median, s.regular_fraction));
        summaries.push(s);
    }
    out.json("ensemble.json", &summaries)
}

/// Wells by label, with their index as the random stream.
fn pick(all: Vec<multiwell::classical::Well>, labels: &[String]) -> Result<Vec<(u64, multiwell::classical::Well)>> {
    labels
        .iter()
        .map(|l| {
            all.iter()
                .position(|w| &w.label == l)
                .map(|i| (i as u64, all[i].clone()))
                .ok_or_else(|| anyhow!("unknown well `{l}`; available: {}", all.iter().map(|w| w.label.as_str()).collect::<Vec<_>>().join(", ")))
        })
        .collect()
}

fn nodal(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<()> {
    let pot = cfg.potential.build()?;
    let m = &cfg.method;
    if pot.dims() != 2 {
        bail!("nodal needs a two-dimensional potential");
    }
    let gc = grid_or(cfg, 6.0, 7);
    let [cx, cy] = m.center;
    let grid = Grid2D::new(
        Grid1D::new(cx - gc.half_width, cx + gc.half_width, gc.log2_points)?,
        Grid1D::new(cy - gc.half_width, cy + gc.half_width, gc.log2_points)?,
    );
    let (psi, energy) = match (&pot, m.state.as_slice()) {
        (PotentialSpec::Harmonic2D { omega_x, omega_y }, &[nx, ny]) => {
            let (wx, wy) = (*omega_x, *omega_y);
            let psi = WaveFunction::from_fn_2d(grid, |x, y| Complex64::new(oscillator_function(nx, x, wx) * oscillator_function(ny, y, wy), 0.0));
            (psi, wx * (nx as f64 + 0.5) + wy * (ny as f64 + 0.5))
        }
        (_, &[k]) => {
            let omega = m.basis_omega.unwrap_or(1.0);
            let basis = BasisSpec::new(BasisFamily::HoProduct2d { omega_x: omega, omega_y: omega }, m.basis_size.unwrap_or(400))
                .with_hbar(m.hbar)
                .with_center(cx, cy);
            let s = assemble(&pot, &basis)?.eigen_lowest(k + 1, true)?;
            let e = s.energies().get(k).copied().ok_or_else(|| anyhow!("state {k} not available"))?;
            let v = s.vectors.as_ref().ok_or_else(|| anyhow!("eigenvectors missing"))?;
            out.note(format!("eigenstate {k} of a {}-function basis, E = {e:.10e}", basis.n));
            (basis.evaluate_2d(&v[k], grid)?, e)
        }
        _ => bail!("`state` must be [n_x, n_y] for ho2d or [k] for an eigenstate index"),
    };
    let mask: Option<Vec<bool>> = m.mask_radius.map(|r| {
        (0..grid.len())
            .map(|i| {
                let (x, y) = grid.point(i % grid.x.n_points, i / grid.x.n_points);
                (x - cx).hypot(y - cy) < r
            })
            .collect()
    });
    let opts = NodalOptions { amplitude_floor: m.amplitude_floor, ..Default::default() };
    let r = nodal_domains(&psi, energy, &pot, mask.as_deref(), &opts)?;
    r.write_rasters(out.file("signs.csv")?, out.file("labels.csv")?)?;
    let mut sign = vec![0i8; r.domain_count];
    for (l, s) in r.labels.iter().zip(&r.signs) {
        if *l >= 0 {
            sign[*l as usize] = *s;
        }
    }
    let mut f = out.file("domains.csv")?;
    writeln!(f, "domain,sign,size,centroid_x,centroid_y,interior")?;
    for i in 0..r.domain_count {
        writeln!(f, "{i},{},{},{:.17e},{:.17e},{}", sign[i], r.domain_sizes[i], r.centroids[i][0], r.centroids[i][1], r.interior[i])?;
    }
    f.flush()?;
    out.note(format!("{} domains, checkerboard score {:.3}", r.domain_count, r.checkerboard_score));
    out.json(
        "summary.json",
        &json!({
            "energy": energy,
            "domain_count": r.domain_count,
            "interior_count": r.interior.iter().filter(|b| **b).count(),
            "checkerboard_score": r.checkerboard_score,
            "diagnostics": r.diagnostics,
        }),
    )
}

fn write_times(out: &RunDir, name: &str, xs: &[usize], ts: &[f64]) -> Result<()> {
    let mut f = out.file(name)?;
    writeln!(f, "size,seconds")?;
    for (x, t) in xs.iter().zip(ts) {
        writeln!(f, "{x},{t:.6e}")?;
    }
    Ok(f.flush()?)
}

fn bench(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<()> {
    let m = &cfg.method;
    let xs = |v: &[usize]| v.iter().map(|&n| n as f64).collect::<Vec<_>>();
    let dense = dense_solve_times(&m.sizes, m.repeats, cfg.seed)?;
    write_times(out, "dense.csv", &m.sizes, &dense)?;
    let band_sizes: Vec<usize> = m.sizes.iter().map(|n| 4 * n).collect();
    let banded = banded_solve_times(&band_sizes, 4, m.repeats, cfg.seed)?;
    write_times(out, "banded.csv", &band_sizes, &banded)?;
    let g = Grid1D::symmetric(10.0, 10)?;
    let plan = PropagationPlan::auto(g, &PotentialSpec::Harmonic { omega: 1.0 }, 10, 1.0)?;
    let psi = gaussian_state(g, &[1.0], &[1.0])?;
    let steps: Vec<usize> = (10..14).map(|k| 1usize << k).collect();
    let sm = propagation_times(&plan, &psi, &steps, m.repeats)?;
    write_times(out, "propagation.csv", &steps, &sm)?;
    let quartic = assemble(&PotentialSpec::quartic(), &BasisSpec::new(BasisFamily::Ho1d { omega: 1.0 }, 100))?;

    let pot = cfg.potential.build()?;
    let mut cost = None;
    if pot.dims() == 1 {
        let (c, w) = packet(cfg, 1);
        let gc = grid_or(cfg, 8.0, 9);
        let reference = grid_eigen_1d(&pot, &Grid1D::symmetric(gc.half_width, gc.log2_points + 2)?, m.n_levels + 4, 1.0, 1e-10)?.energies();
        let mut cc = CostConfig::new(m.basis_omega.unwrap_or(1.0), grid_1d(gc)?, c[0], w[0]);
        cc.repeats = m.repeats;
        let (md, sm) = cost_benchmark(&pot, m.n_levels, m.epsilon, &reference, &cc)?;
        let mut f = out.file("cost.csv")?;
        writeln!(f, "{}", CostRecord::csv_header())?;
        writeln!(f, "{}", md.csv_row())?;
        writeln!(f, "{}", sm.csv_row())?;
        f.flush()?;
        cost = Some((md, sm));
    }
    let summary = json!({
        "dense_exponent": fit_exponent(&xs(&m.sizes), &dense).ok(),
        "banded_exponent": fit_exponent(&xs(&band_sizes), &banded).ok(),
        "propagation_exponent": fit_exponent(&xs(&steps), &sm).ok(),
        "quartic_banded": quartic.is_banded(),
        "quartic_bandwidth": quartic.bandwidth(),
        "cost": cost,
    });
    out.note(format!("{summary}"));
    out.json("summary.json", &summary)
}

fn critical_points(cfg: &ExperimentConfig, out: &mut RunDir) -> Result<()> {
    let pot = cfg.potential.build()?;
    if pot.dims() != 2 {
        bail!("critical-points needs a two-dimensional potential");
    }
    let b = cfg.method.search_box.unwrap_or_else(|| {
        let r = match cfg.potential {
            PotentialConfig::Qo { w } => qo_peripheral_minimum(w).map_or(0.3, |r| (2.0 * r).max(0.3)),
            _ => 3.0,
        };
        [-r, -r, r, r]
    });
    let s = find_critical_points(&pot, [b[0], b[1]], [b[2], b[3]], cfg.method.seeds_per_axis)?;
    s.write_csv(out.file("critical_points.csv")?)?;
    let counts = json!({
        "minima": s.count(CriticalKind::Minimum),
        "saddles": s.count(CriticalKind::Saddle),
        "maxima": s.count(CriticalKind::Maximum),
        "degenerate": s.count(CriticalKind::Degenerate),
        "unconverged": s.unconverged,
        "search_box": b,
    });
    out.note(format!("{counts}"));
    out.json("summary.json", &counts)
}
