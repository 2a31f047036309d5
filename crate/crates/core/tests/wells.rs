//! Eigenstates of the W = 18 quartic oscillator in its separate wells.

use multiwell::analysis::{nodal_domains, NodalOptions};
use multiwell::classical::energy_scale;
use multiwell::diag::{assemble, BasisFamily, BasisSpec};
use multiwell::grid::{Grid1D, Grid2D};
use multiwell::potentials::PotentialSpec;

const HBAR: f64 = 1e-5;

/// Checkerboard scores of the well's eigenstates with `E/E_S` in `[lo, hi]`
/// that have at least one interior domain.
fn scores(basis: BasisSpec, center: (f64, f64), radius: f64, n_levels: usize, lo: f64, hi: f64) -> Vec<f64> {
    let qo = PotentialSpec::Qo { w: 18.0 };
    let es = energy_scale(&qo);
    let spec = assemble(&qo, &basis).unwrap().eigen_lowest(n_levels, true).unwrap();
    let vectors = spec.vectors.as_ref().unwrap();
    let (cx, cy) = center;
    let g = Grid2D::new(Grid1D::new(cx - radius, cx + radius, 7).unwrap(), Grid1D::new(cy - radius, cy + radius, 7).unwrap());
    let mask: Vec<bool> = (0..g.len())
        .map(|i| {
            let (x, y) = g.point(i % g.x.n_points, i / g.x.n_points);
            (x - cx).hypot(y - cy) < radius
        })
        .collect();
    let mut out = Vec::new();
    for (k, e) in spec.energies().into_iter().enumerate() {
        if e < lo * es || e > hi * es {
            continue;
        }
        let psi = basis.evaluate_2d(&vectors[k], g).unwrap();
        let r = nodal_domains(&psi, e, &qo, Some(&mask), &NodalOptions::default()).unwrap();
        if r.interior.iter().any(|&b| b) {
            out.push(r.checkerboard_score);
        }
    }
    out
}

fn checkerboard_fraction(s: &[f64]) -> f64 {
    s.iter().filter(|&&x| x > 0.5).count() as f64 / s.len() as f64
}

#[test]
fn peripheral_states_are_checkerboards_central_are_not() {
    let om = (1.0f64 / 18.0).sqrt();
    let peripheral = BasisSpec::new(BasisFamily::HoProduct2d { omega_x: om, omega_y: 0.5f64.sqrt() }, 800)
        .with_hbar(HBAR)
        .with_center(1.0 / 6.0, 0.0);
    let central = BasisSpec::new(BasisFamily::HoProduct2d { omega_x: om, omega_y: om }, 1540).with_hbar(HBAR);
    let p = scores(peripheral, (1.0 / 6.0, 0.0), 1.0 / 12.0, 80, 0.65, 0.85);
    let c = scores(central, (0.0, 0.0), 1.0 / 12.0, 170, 0.65, 0.85);
    assert!(p.len() >= 5 && c.len() >= 5, "{} peripheral, {} central states", p.len(), c.len());
    let (fp, fc) = (checkerboard_fraction(&p), checkerboard_fraction(&c));
    assert!(fp > 0.8, "peripheral {p:?}");
    assert!(fc < 0.2, "central {c:?}");
}
