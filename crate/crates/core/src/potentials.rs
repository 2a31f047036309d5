//! Potential library (oscillators, QO, D5, polynomials, SUSY models) with
//! analytic gradients and Hessians, and a Newton critical-point finder.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::susy::SusyPotential;

/// QO surface: `(x²+y²)/(2W) + xy² − x³/3 + (x²+y²)²`.
pub fn eval_qo(x: f64, y: f64, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::domain(format!("QO parameter W = {w} must be positive")));
    }
    Ok(qo(x, y, w))
}

/// D5 surface with the standard parameters `a = 2, b = 1`.
pub fn eval_d5(x: f64, y: f64) -> f64 {
    d5(x, y, 2.0, 1.0)
}

fn qo(x: f64, y: f64, w: f64) -> f64 {
    let r2 = x * x + y * y;
    r2 / (2.0 * w) + x * y * y - x * x * x / 3.0 + r2 * r2
}

fn d5(x: f64, y: f64, a: f64, b: f64) -> f64 {
    0.25 * x.powi(4) + x * y * y + a * y * y - b * x * x
}

/// Sparse polynomial `Σ c · x^px · y^py`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial2D {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Polynomial2D {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, f64)>) -> Self {
        let mut p = Self::new();
        for (px, py, c) in terms {
            p.add(px, py, c);
        }
        p
    }

    pub fn add(&mut self, px: u32, py: u32, c: f64) {
        let e = self.terms.entry((px, py)).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&(px, py));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.terms.iter().map(|(&(px, py), &c)| (px, py, c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms()
            .map(|(px, py, c)| c * x.powi(px as i32) * y.powi(py as i32))
            .sum()
    }

    /// Partial derivative `∂^dx_x ∂^dy_y` as a new polynomial.
    pub fn derivative(&self, dx: u32, dy: u32) -> Self {
        let mut out = Self::new();
        for (px, py, c) in self.terms() {
            if px < dx || py < dy {
                continue;
            }
            let fx: f64 = (0..dx).map(|k| (px - k) as f64).product();
            let fy: f64 = (0..dy).map(|k| (py - k) as f64).product();
            out.add(px - dx, py - dy, c * fx * fy);
        }
        out
    }
}

/// Parametric potential description. Coordinates are `x` (1D) or `(x, y)`.
#[derive(Clone)]
pub enum PotentialSpec {
    /// `½ω²x²`.
    Harmonic { omega: f64 },
    /// `½(ω_x²x² + ω_y²y²)`.
    Harmonic2D { omega_x: f64, omega_y: f64 },
    /// `Σ c_k x^k`.
    Polynomial1D { coefficients: Vec<f64> },
    /// Zero inside `|x| < half_width`, `wall` outside.
    Box1D { half_width: f64, wall: f64 },
    Qo { w: f64 },
    /// `x⁴/4 + xy² + a y² − b x²`.
    D5 { a: f64, b: f64 },
    Polynomial2D(Polynomial2D),
    /// Constructed SUSY potential (coordinate in oscillator units scaled by ω).
    Susy(Arc<SusyPotential>),
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Harmonic { omega } => write!(f, "Harmonic(ω={omega})"),
            PotentialSpec::Harmonic2D { omega_x, omega_y } => {
                write!(f, "Harmonic2D(ωx={omega_x}, ωy={omega_y})")
            }
            PotentialSpec::Polynomial1D { coefficients } => write!(f, "Polynomial1D({coefficients:?})"),
            PotentialSpec::Box1D { half_width, wall } => write!(f, "Box1D(a={half_width}, wall={wall})"),
            PotentialSpec::Qo { w } => write!(f, "QO(W={w})"),
            PotentialSpec::D5 { a, b } => write!(f, "D5(a={a}, b={b})"),
            PotentialSpec::Polynomial2D(p) => write!(f, "Polynomial2D({:?})", p.terms),
            PotentialSpec::Susy(s) => write!(f, "Susy({:?})", s.params()),
        }
    }
}

/// Classification of a critical point from the Hessian spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
    Degenerate,
}

impl fmt::Display for CriticalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriticalKind::Minimum => "minimum",
            CriticalKind::Saddle => "saddle",
            CriticalKind::Maximum => "maximum",
            CriticalKind::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub position: [f64; 2],
    pub energy: f64,
    pub kind: CriticalKind,
    pub hessian_eigenvalues: [f64; 2],
}

/// Result of [`find_critical_points`]: converged points plus failing seeds.
#[derive(Clone, Debug, Default)]
pub struct CriticalSearch {
    pub points: Vec<CriticalPoint>,
    pub unconverged: Vec<[f64; 2]>,
}

impl CriticalSearch {
    pub fn count(&self, kind: CriticalKind) -> usize {
        self.points.iter().filter(|p| p.kind == kind).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,E,class")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{}",
                p.position[0], p.position[1], p.energy, p.kind
            )?;
        }
        Ok(())
    }
}

impl PotentialSpec {
    pub fn dims(&self) -> usize {
        match self {
            PotentialSpec::Harmonic { .. }
            | PotentialSpec::Polynomial1D { .. }
            | PotentialSpec::Box1D { .. }
            | PotentialSpec::Susy(_) => 1,
            _ => 2,
        }
    }

    /// Quartic `x⁴`, handy for basis tests.
    pub fn quartic() -> Self {
        PotentialSpec::Polynomial1D {
            coefficients: vec![0.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    pub fn value(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.dims() {
            return Err(Error::GridMismatch(format!(
                "{}-dimensional point for a {}-dimensional potential",
                p.len(),
                self.dims()
            )));
        }
        match self {
            PotentialSpec::Harmonic { omega } => Ok(0.5 * omega * omega * p[0] * p[0]),
            PotentialSpec::Polynomial1D { coefficients } => Ok(horner(coefficients, p[0])),
            PotentialSpec::Box1D { half_width, wall } => {
                Ok(if p[0].abs() < *half_width { 0.0 } else { *wall })
            }
            PotentialSpec::Susy(s) => s.value(p[0]),
            PotentialSpec::Harmonic2D { omega_x, omega_y } => {
                Ok(0.5 * (omega_x * omega_x * p[0] * p[0] + omega_y * omega_y * p[1] * p[1]))
            }
            PotentialSpec::Qo { w } => eval_qo(p[0], p[1], *w),
            PotentialSpec::D5 { a, b } => Ok(d5(p[0], p[1], *a, *b)),
            PotentialSpec::Polynomial2D(poly) => Ok(poly.eval(p[0], p[1])),
        }
    }

    pub fn value_1d(&self, x: f64) -> Result<f64> {
        self.value(&[x])
    }

    pub fn value_2d(&self, x: f64, y: f64) -> Result<f64> {
        self.value(&[x, y])
    }

    /// Samples on every node of a grid of matching dimension.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.dims() != self.dims() {
            return Err(Error::GridMismatch(format!(
                "{}-dimensional grid for a {}-dimensional potential",
                grid.dims(),
                self.dims()
            )));
        }
        match (self, grid) {
            (PotentialSpec::Susy(s), Grid::One(g)) => s.sample(&g.points()),
            _ => (0..grid.len()).map(|j| self.value(&grid.coordinates(j))).collect(),
        }
    }

    /// Exact polynomial form in `(x, y)` when the potential is a 2D polynomial.
    pub fn polynomial_2d(&self) -> Option<Polynomial2D> {
        match self {
            PotentialSpec::Harmonic2D { omega_x, omega_y } => Some(Polynomial2D::from_terms([
                (2, 0, 0.5 * omega_x * omega_x),
                (0, 2, 0.5 * omega_y * omega_y),
            ])),
            PotentialSpec::Qo { w } => Some(Polynomial2D::from_terms([
                (2, 0, 0.5 / w),
                (0, 2, 0.5 / w),
                (1, 2, 1.0),
                (3, 0, -1.0 / 3.0),
                (4, 0, 1.0),
                (2, 2, 2.0),
                (0, 4, 1.0),
            ])),
            PotentialSpec::D5 { a, b } => Some(Polynomial2D::from_terms([
                (4, 0, 0.25),
                (1, 2, 1.0),
                (0, 2, *a),
                (2, 0, -*b),
            ])),
            PotentialSpec::Polynomial2D(p) => Some(p.clone()),
            _ => None,
        }
    }

    /// Coefficients `c_k` of `Σ c_k x^k` for 1D polynomial potentials.
    pub fn polynomial_1d(&self) -> Option<Vec<f64>> {
        match self {
            PotentialSpec::Harmonic { omega } => Some(vec![0.0, 0.0, 0.5 * omega * omega]),
            PotentialSpec::Polynomial1D { coefficients } => Some(coefficients.clone()),
            _ => None,
        }
    }

    /// Analytic gradient for 2D potentials.
    pub fn gradient(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        match self {
            PotentialSpec::Qo { w } => {
                let r2 = x * x + y * y;
                Ok([
                    x / w + y * y - x * x + 4.0 * x * r2,
                    y / w + 2.0 * x * y + 4.0 * y * r2,
                ])
            }
            PotentialSpec::D5 { a, b } => Ok([x * x * x + y * y - 2.0 * b * x, 2.0 * x * y + 2.0 * a * y]),
            PotentialSpec::Harmonic2D { omega_x, omega_y } => {
                Ok([omega_x * omega_x * x, omega_y * omega_y * y])
            }
            PotentialSpec::Polynomial2D(p) => Ok([p.derivative(1, 0).eval(x, y), p.derivative(0, 1).eval(x, y)]),
            _ => Err(Error::domain(format!("{self:?} has no 2D gradient"))),
        }
    }

    /// Analytic Hessian `[[U_xx, U_xy], [U_xy, U_yy]]` for 2D potentials.
    pub fn hessian(&self, x: f64, y: f64) -> Result<[[f64; 2]; 2]> {
        let (xx, xy, yy) = match self {
            PotentialSpec::Qo { w } => (
                1.0 / w - 2.0 * x + 12.0 * x * x + 4.0 * y * y,
                2.0 * y + 8.0 * x * y,
                1.0 / w + 2.0 * x + 4.0 * x * x + 12.0 * y * y,
            ),
            PotentialSpec::D5 { a, b } => (3.0 * x * x - 2.0 * b, 2.0 * y, 2.0 * x + 2.0 * a),
            PotentialSpec::Harmonic2D { omega_x, omega_y } => (omega_x * omega_x, 0.0, omega_y * omega_y),
            PotentialSpec::Polynomial2D(p) => (
                p.derivative(2, 0).eval(x, y),
                p.derivative(1, 1).eval(x, y),
                p.derivative(0, 2).eval(x, y),
            ),
            _ => return Err(Error::domain(format!("{self:?} has no 2D Hessian"))),
        };
        Ok([[xx, xy], [xy, yy]])
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(m: [[f64; 2]; 2]) -> [f64; 2] {
    let tr = 0.5 * (m[0][0] + m[1][1]);
    let d = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[0][1]).sqrt();
    [tr - d, tr + d]
}

pub const DEFAULT_SEEDS: usize = 21;
const MAX_NEWTON: usize = 200;
const DEDUP_DISTANCE: f64 = 1e-6;
const DEGENERATE_EIGENVALUE: f64 = 1e-8;

/// Newton iteration on `∇U = 0` from a `seeds × seeds` lattice over the box
/// `[lo.0, hi.0] × [lo.1, hi.1]`. Points leaving the box are dropped.
pub fn find_critical_points(
    u: &PotentialSpec,
    lo: [f64; 2],
    hi: [f64; 2],
    seeds: usize,
) -> Result<CriticalSearch> {
    if seeds == 0 {
        return Err(Error::domain("at least one seed is required"));
    }
    if u.dims() != 2 {
        return Err(Error::domain("critical-point search needs a 2D potential"));
    }
    let scale = (hi[0] - lo[0]).abs().max((hi[1] - lo[1]).abs());
    let mut out = CriticalSearch::default();
    for i in 0..seeds {
        for j in 0..seeds {
            let t = |k: usize| if seeds == 1 { 0.5 } else { k as f64 / (seeds - 1) as f64 };
            let seed = [lo[0] + t(i) * (hi[0] - lo[0]), lo[1] + t(j) * (hi[1] - lo[1])];
            match newton(u, seed, scale)? {
                Some(p) => {
                    let inside = p[0] >= lo[0] - 1e-12
                        && p[0] <= hi[0] + 1e-12
                        && p[1] >= lo[1] - 1e-12
                        && p[1] <= hi[1] + 1e-12;
                    if !inside {
                        continue;
                    }
                    let dup = out.points.iter().any(|q| {
                        ((q.position[0] - p[0]).powi(2) + (q.position[1] - p[1]).powi(2)).sqrt() < DEDUP_DISTANCE
                    });
                    if !dup {
                        out.points.push(classify(u, p)?);
                    }
                }
                None => out.unconverged.push(seed),
            }
        }
    }
    out.points.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.position[0].total_cmp(&b.position[0]))
            .then(a.position[1].total_cmp(&b.position[1]))
    });
    Ok(out)
}

fn classify(u: &PotentialSpec, p: [f64; 2]) -> Result<CriticalPoint> {
    let ev = sym2_eigenvalues(u.hessian(p[0], p[1])?);
    let kind = if ev.iter().any(|l| l.abs() < DEGENERATE_EIGENVALUE) {
        CriticalKind::Degenerate
    } else if ev[0] > 0.0 {
        CriticalKind::Minimum
    } else if ev[1] < 0.0 {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    };
    Ok(CriticalPoint {
        position: p,
        energy: u.value_2d(p[0], p[1])?,
        kind,
        hessian_eigenvalues: ev,
    })
}

fn newton(u: &PotentialSpec, seed: [f64; 2], scale: f64) -> Result<Option<[f64; 2]>> {
    let mut p = seed;
    for _ in 0..MAX_NEWTON {
        let g = u.gradient(p[0], p[1])?;
        let h = u.hessian(p[0], p[1])?;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det == 0.0 || !det.is_finite() {
            return Ok(None);
        }
        let dx = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
        let dy = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
        p = [p[0] - dx, p[1] - dy];
        if !p[0].is_finite() || !p[1].is_finite() || p[0].abs().max(p[1].abs()) > 100.0 * scale.max(1.0) {
            return Ok(None);
        }
        let step = dx.abs().max(dy.abs());
        if step < 1e-15 * scale.max(1e-300) + 1e-16 {
            let g = u.gradient(p[0], p[1])?;
            if g[0].hypot(g[1]) < 1e-10 {
                return Ok(Some(p));
            }
        }
    }
    let g = u.gradient(p[0], p[1])?;
    if g[0].hypot(g[1]) < 1e-12 {
        return Ok(Some(p));
    }
    Ok(None)
}

/// Serializable potential description used by configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialConfig {
    Ho {
        #[serde(default = "one")]
        omega: f64,
    },
    Ho2d {
        #[serde(default = "one")]
        omega_x: f64,
        #[serde(default = "one")]
        omega_y: f64,
    },
    Quartic,
    Polynomial1d {
        coefficients: Vec<f64>,
    },
    Qo {
        #[serde(rename = "W", alias = "w")]
        w: f64,
    },
    D5 {
        #[serde(default = "two")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    /// Terms as `[px, py, coefficient]`.
    Polynomial2d {
        coefficients: Vec<(u32, u32, f64)>,
    },
    /// Constructed SUSY potential; giving `mu` selects the triple well.
    Susy {
        nu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "one")]
        lambda1: f64,
        #[serde(default = "one")]
        omega: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl PotentialConfig {
    pub fn susy_params(&self) -> Option<crate::susy::SusyParams> {
        use crate::susy::SusyParams;
        match *self {
            PotentialConfig::Susy { nu, mu, lambda, lambda1, omega } => Some(
                match mu {
                    Some(mu) => SusyParams::triple_well(nu, mu, lambda, lambda1),
                    None => SusyParams::double_well(nu, lambda),
                }
                .with_omega(omega),
            ),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<PotentialSpec> {
        let spec = match self {
            PotentialConfig::Ho { omega } => PotentialSpec::Harmonic { omega: *omega },
            PotentialConfig::Ho2d { omega_x, omega_y } => PotentialSpec::Harmonic2D {
                omega_x: *omega_x,
                omega_y: *omega_y,
            },
            PotentialConfig::Quartic => PotentialSpec::quartic(),
            PotentialConfig::Polynomial1d { coefficients } => PotentialSpec::Polynomial1D {
                coefficients: coefficients.clone(),
            },
            PotentialConfig::Qo { w } => {
                if !(*w > 0.0) {
                    return Err(Error::domain(format!("QO parameter W = {w} must be positive")));
                }
                PotentialSpec::Qo { w: *w }
            }
            PotentialConfig::D5 { a, b } => PotentialSpec::D5 { a: *a, b: *b },
            PotentialConfig::Polynomial2d { coefficients } => {
                PotentialSpec::Polynomial2D(Polynomial2D::from_terms(coefficients.iter().copied()))
            }
            PotentialConfig::Susy { .. } => {
                let params = self.susy_params().expect("susy variant");
                PotentialSpec::Susy(Arc::new(crate::susy::SusyPotential::new(params)?))
            }
        };
        Ok(spec)
    }
}

/// QO geometry at the peripheral well lying on the positive x axis.
pub fn qo_peripheral_minimum(w: f64) -> Option<f64> {
    // 4x² − x + 1/W = 0, larger root
    let disc = 1.0 - 16.0 / w;
    (disc >= 0.0).then(|| (1.0 + disc.sqrt()) / 8.0)
}

pub fn qo_saddle(w: f64) -> Option<f64> {
    let disc = 1.0 - 16.0 / w;
    (disc >= 0.0).then(|| (1.0 - disc.sqrt()) / 8.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn qo_box() -> ([f64; 2], [f64; 2]) {
        ([-0.3, -0.3], [0.3, 0.3])
    }

    #[test]
    fn qo_examples() {
        assert_eq!(eval_qo(0.0, 0.0, 18.0).unwrap(), 0.0);
        assert_relative_eq!(eval_qo(1.0 / 12.0, 0.0, 18.0).unwrap(), 1.0 / 20736.0, max_relative = 1e-12);
        assert!(eval_qo(1.0 / 6.0, 0.0, 18.0).unwrap().abs() < 1e-16);
        assert!(matches!(eval_qo(0.0, 0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn qo_axis_roots_oracle() {
        // x/W − x² + 4x³ = 0 with W = 18: x = 1/6 and 1/12.
        assert_relative_eq!(qo_peripheral_minimum(18.0).unwrap(), 1.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(qo_saddle(18.0).unwrap(), 1.0 / 12.0, max_relative = 1e-15);
        assert!(qo_saddle(13.0).is_none());
    }

    #[test]
    fn d5_examples() {
        assert_relative_eq!(eval_d5(2f64.sqrt(), 0.0), -1.0, max_relative = 1e-15);
        assert_eq!(eval_d5(-2.0, 2.0), 0.0);
        assert_eq!(eval_d5(0.0, 0.0), 0.0);
    }

    #[test]
    fn qo_seven_points() {
        let (lo, hi) = qo_box();
        let s = find_critical_points(&PotentialSpec::Qo { w: 18.0 }, lo, hi, DEFAULT_SEEDS).unwrap();
        assert_eq!(s.points.len(), 7);
        assert_eq!(s.count(CriticalKind::Minimum), 4);
        assert_eq!(s.count(CriticalKind::Saddle), 3);
        for p in &s.points {
            match p.kind {
                CriticalKind::Minimum => assert!(p.energy.abs() < 1e-10),
                _ => assert!((p.energy - 1.0 / 20736.0).abs() < 1e-10),
            }
        }
    }

    #[test]
    fn qo_single_minimum() {
        let (lo, hi) = qo_box();
        let s = find_critical_points(&PotentialSpec::Qo { w: 13.0 }, lo, hi, DEFAULT_SEEDS).unwrap();
        assert_eq!(s.points.len(), 1);
        assert_eq!(s.points[0].kind, CriticalKind::Minimum);
        assert!(s.points[0].position[0].abs() < 1e-12);
    }

    #[test]
    fn d5_five_points() {
        let s = find_critical_points(&PotentialSpec::D5 { a: 2.0, b: 1.0 }, [-3.0, -3.0], [3.0, 3.0], DEFAULT_SEEDS)
            .unwrap();
        assert_eq!(s.points.len(), 5);
        assert_eq!(s.count(CriticalKind::Minimum), 2);
        assert_eq!(s.count(CriticalKind::Saddle), 3);
        for p in &s.points {
            let target = if p.kind == CriticalKind::Minimum { -1.0 } else { 0.0 };
            assert!((p.energy - target).abs() < 1e-10);
        }
    }

    #[test]
    fn maxwell_condition_degenerate_saddles() {
        for a in [2.0, 3.0, 1.2] {
            let b = a * a / 4.0;
            let s = find_critical_points(&PotentialSpec::D5 { a, b }, [-4.0, -4.0], [4.0, 4.0], DEFAULT_SEEDS).unwrap();
            let saddles: Vec<f64> = s
                .points
                .iter()
                .filter(|p| p.kind == CriticalKind::Saddle)
                .map(|p| p.energy)
                .collect();
            assert_eq!(saddles.len(), 3);
            for e in &saddles {
                assert!((e - saddles[0]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn critical_csv() {
        let (lo, hi) = qo_box();
        let s = find_critical_points(&PotentialSpec::Qo { w: 18.0 }, lo, hi, DEFAULT_SEEDS).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 8);
        assert!(text.contains("saddle"));
    }

    #[test]
    fn polynomial_forms_match_direct() {
        for spec in [
            PotentialSpec::Qo { w: 18.0 },
            PotentialSpec::D5 { a: 2.0, b: 1.0 },
            PotentialSpec::Harmonic2D { omega_x: 1.0, omega_y: 2.0 },
        ] {
            let poly = spec.polynomial_2d().unwrap();
            for &(x, y) in &[(0.3, -0.7), (-1.1, 0.2), (0.05, 0.01)] {
                assert_relative_eq!(poly.eval(x, y), spec.value_2d(x, y).unwrap(), epsilon = 1e-14);
                let g = spec.gradient(x, y).unwrap();
                let pg = PotentialSpec::Polynomial2D(poly.clone()).gradient(x, y).unwrap();
                assert_relative_eq!(g[0], pg[0], epsilon = 1e-13);
                assert_relative_eq!(g[1], pg[1], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn config_builds() {
        assert!(matches!(PotentialConfig::Qo { w: 18.0 }.build().unwrap(), PotentialSpec::Qo { .. }));
        assert!(PotentialConfig::Qo { w: -1.0 }.build().is_err());
        let p = PotentialConfig::Polynomial2d { coefficients: vec![(2, 0, 1.0), (0, 2, 1.0)] }.build().unwrap();
        assert_eq!(p.value_2d(3.0, 4.0).unwrap(), 25.0);
    }

    fn central_gradient(spec: &PotentialSpec, x: f64, y: f64) -> [f64; 2] {
        let h = 1e-5;
        let f = |a: f64, b: f64| spec.value_2d(a, b).unwrap();
        [
            (f(x + h, y) - f(x - h, y)) / (2.0 * h),
            (f(x, y + h) - f(x, y - h)) / (2.0 * h),
        ]
    }

    proptest! {
        #[test]
        fn gradients_match_differences(x in -1.5f64..1.5, y in -1.5f64..1.5, w in 5.0f64..30.0) {
            for spec in [PotentialSpec::Qo { w }, PotentialSpec::D5 { a: 2.0, b: 1.0 }] {
                let g = spec.gradient(x, y).unwrap();
                let fd = central_gradient(&spec, x, y);
                for k in 0..2 {
                    let scale = g[k].abs().max(1e-3);
                    prop_assert!((g[k] - fd[k]).abs() / scale < 1e-6);
                }
            }
        }

        #[test]
        fn qo_threefold_symmetry(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let (s, c) = (2.0 * std::f64::consts::PI / 3.0).sin_cos();
            let (xr, yr) = (c * x - s * y, s * x + c * y);
            let a = eval_qo(x, y, 18.0).unwrap();
            let b = eval_qo(xr, yr, 18.0).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn d5_even_in_y(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            prop_assert_eq!(eval_d5(x, y), eval_d5(x, -y));
        }
    }
}
