//! Exactly solvable double- and triple-well Hamiltonians obtained from the
//! oscillator by one or two SUSY (Darboux) steps below its ground state.
//!
//! Everything is evaluated in the reduced coordinate `ξ = √ω x` with energies in
//! units of ω, where the seed is `−½d²/dξ² + ½ξ²`. Physical values follow from
//! `U(x) = ω U(ξ)` and `ψ(x) = ω^{1/4} ψ(ξ)`.
//!
//! Notation: `φ₁ = D_ν(√2ξ)`, `φ₂ = D_ν(−√2ξ)`, `φ = φ₁ + Λφ₂` at ε̄ = ν + ½;
//! `f = D_μ(√2ξ) − Λ₁D_μ(−√2ξ)` at ε̄₁ = μ + ½; `Wr = f φ' − f' φ`.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{residual_norm, Grid1D, WaveFunction};
use crate::specfun::{gamma, oscillator_function_with_derivative, CylinderEvaluator};

/// Normalization tolerance before a grid is declared too small.
pub const NORM_TOL: f64 = 1e-6;
/// Default reduced half-width and grid exponent.
pub const DEFAULT_HALF_WIDTH: f64 = 25.0;
pub const DEFAULT_EXPONENT: u32 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SusyParams {
    pub omega: f64,
    /// Reduced factorization energy ε/ω.
    pub eps_bar: f64,
    /// Second reduced factorization energy (triple well only).
    pub eps1_bar: Option<f64>,
    pub lambda: f64,
    pub lambda1: f64,
}

impl SusyParams {
    pub fn double_well(nu: f64, lambda: f64) -> Self {
        Self {
            omega: 1.0,
            eps_bar: nu + 0.5,
            eps1_bar: None,
            lambda,
            lambda1: 1.0,
        }
    }

    pub fn triple_well(nu: f64, mu: f64, lambda: f64, lambda1: f64) -> Self {
        Self {
            omega: 1.0,
            eps_bar: nu + 0.5,
            eps1_bar: Some(mu + 0.5),
            lambda,
            lambda1,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn nu(&self) -> f64 {
        self.eps_bar - 0.5
    }

    pub fn mu(&self) -> Option<f64> {
        self.eps1_bar.map(|e| e - 0.5)
    }

    pub fn is_triple(&self) -> bool {
        self.eps1_bar.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::domain(format!("ω = {} must be positive", self.omega)));
        }
        if !(self.eps_bar < 0.5) {
            return Err(Error::domain(format!(
                "ε̄ = {} must lie below the oscillator ground level 1/2",
                self.eps_bar
            )));
        }
        if !(self.lambda > 0.0) || !(self.lambda1 > 0.0) {
            return Err(Error::domain(format!(
                "weights Λ = {}, Λ₁ = {} must be positive",
                self.lambda, self.lambda1
            )));
        }
        if let Some(e1) = self.eps1_bar {
            if !(e1 <= self.eps_bar) {
                return Err(Error::domain(format!("ε̄₁ = {e1} must lie below ε̄ = {}", self.eps_bar)));
            }
            if !(self.eps_bar - e1 > 1e-8) {
                return Err(Error::Construction(format!(
                    "degenerate factorization energies ε̄ − ε̄₁ = {:e}; normalization constants vanish",
                    self.eps_bar - e1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    /// Double well built on the symmetric combination (Λ = 1).
    Hmm,
    /// Double well with weight Λ.
    Hpp,
    TripleHmm,
    TripleHpp,
}

impl Family {
    fn of(p: &SusyParams) -> Self {
        match (p.is_triple(), p.lambda == 1.0 && p.lambda1 == 1.0) {
            (false, true) => Family::Hmm,
            (false, false) => Family::Hpp,
            (true, true) => Family::TripleHmm,
            (true, false) => Family::TripleHpp,
        }
    }
}

/// `value = v·e^{scale}`, `derivative = d·e^{scale}` (derivative in ξ).
#[derive(Clone, Copy, Debug)]
struct Combo {
    scale: f64,
    v: f64,
    d: f64,
}

impl Combo {
    fn ln(&self) -> f64 {
        self.scale + self.v.abs().ln()
    }

    fn dlog(&self) -> f64 {
        self.d / self.v
    }

    fn value(&self) -> f64 {
        self.v * self.scale.exp()
    }
}

/// `a₁ D(√2ξ) + a₂ D(−√2ξ)` and its ξ-derivative in scaled form.
fn combo(ev: &CylinderEvaluator, a1: f64, a2: f64, xi: f64) -> Result<Combo> {
    let z = SQRT_2 * xi;
    let p1 = ev.eval(z)?;
    let p2 = ev.eval(-z)?;
    let mut terms = Vec::with_capacity(2);
    if a1 != 0.0 {
        terms.push((p1.ln_abs + a1.abs().ln(), p1.sign * a1.signum(), SQRT_2 * p1.dlog));
    }
    if a2 != 0.0 {
        terms.push((p2.ln_abs + a2.abs().ln(), p2.sign * a2.signum(), -SQRT_2 * p2.dlog));
    }
    let scale = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let mut v = 0.0;
    let mut d = 0.0;
    for (l, s, dl) in terms {
        let w = s * (l - scale).exp();
        v += w;
        d += w * dl;
    }
    Ok(Combo { scale, v, d })
}

/// Quantities of the triple-well construction at one point.
#[derive(Clone, Copy, Debug)]
struct TripleLocal {
    /// `g = φ'/φ`.
    g: f64,
    ln_phi: f64,
    /// `f/φ`, `f'/φ`.
    fh: f64,
    fph: f64,
    /// `Wr/φ² = f̂ g − f̂'`.
    dh: f64,
}

/// SUSY potential with cached cylinder evaluators.
#[derive(Clone, Debug)]
pub struct SusyPotential {
    params: SusyParams,
    nu_eval: CylinderEvaluator,
    mu_eval: Option<CylinderEvaluator>,
}

impl SusyPotential {
    pub fn new(params: SusyParams) -> Result<Self> {
        params.validate()?;
        let nu_eval = CylinderEvaluator::new(params.nu())?;
        let mu_eval = params.mu().map(CylinderEvaluator::new).transpose()?;
        Ok(Self {
            params,
            nu_eval,
            mu_eval,
        })
    }

    pub fn params(&self) -> &SusyParams {
        &self.params
    }

    pub fn family(&self) -> Family {
        Family::of(&self.params)
    }

    fn c(&self) -> f64 {
        2.0 * (self.params.mu().unwrap_or(0.0) - self.params.nu())
    }

    fn phi(&self, xi: f64) -> Result<Combo> {
        combo(&self.nu_eval, 1.0, self.params.lambda, xi)
    }

    fn f(&self, xi: f64) -> Result<Combo> {
        let ev = self.mu_eval.as_ref().ok_or_else(|| Error::domain("not a triple-well model"))?;
        combo(ev, 1.0, -self.params.lambda1, xi)
    }

    fn triple_local(&self, xi: f64) -> Result<TripleLocal> {
        let phi = self.phi(xi)?;
        let f = self.f(xi)?;
        let ln_phi = phi.ln();
        let r = (f.scale - ln_phi).exp();
        let fh = f.v * r;
        let fph = f.d * r;
        let g = phi.dlog();
        Ok(TripleLocal {
            g,
            ln_phi,
            fh,
            fph,
            dh: fh * g - fph,
        })
    }

    /// `(ln φ, φ'/φ)` for the weighted combination at ε̄.
    pub fn log_phi(&self, xi: f64) -> Result<(f64, f64)> {
        let p = self.phi(xi)?;
        Ok((p.ln(), p.dlog()))
    }

    /// Reduced potential `U(ξ)` (units of ω).
    pub fn value_reduced(&self, xi: f64) -> Result<f64> {
        let nu = self.params.nu();
        if !self.params.is_triple() {
            let g = self.phi(xi)?.dlog();
            return Ok(g * g - 0.5 * xi * xi + 2.0 * nu + 1.0);
        }
        let t = self.triple_local(xi)?;
        let c = self.c();
        let rho = t.fh / t.dh;
        let sigma = (t.fph + t.fh * t.g) / t.dh;
        Ok(0.5 * xi * xi - c * (sigma - c * rho * rho))
    }

    /// `dU/dξ` in reduced units.
    pub fn derivative_reduced(&self, xi: f64) -> Result<f64> {
        let nu = self.params.nu();
        if !self.params.is_triple() {
            let g = self.phi(xi)?.dlog();
            return Ok(2.0 * g * (xi * xi - 2.0 * nu - 1.0 - g * g) - xi);
        }
        let mu = self.params.mu().unwrap_or(nu);
        let t = self.triple_local(xi)?;
        let c = self.c();
        let rho = t.fh / t.dh;
        let sigma = (t.fph + t.fh * t.g) / t.dh;
        let tau = t.fph * t.g / t.dh;
        let q_sum = 2.0 * xi * xi - 2.0 * mu - 2.0 * nu - 2.0;
        let rho_p = sigma - c * rho * rho;
        let sigma_p = q_sum * rho + 2.0 * tau - c * rho * sigma;
        let rho_pp = sigma_p - 2.0 * c * rho * rho_p;
        Ok(xi - c * rho_pp)
    }

    /// Physical potential `ω U(√ω x)`.
    pub fn value(&self, x: f64) -> Result<f64> {
        let w = self.params.omega;
        Ok(w * self.value_reduced(w.sqrt() * x)?)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let w = self.params.omega;
        Ok(w * w.sqrt() * self.derivative_reduced(w.sqrt() * x)?)
    }

    pub fn sample(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.value(x)).collect()
    }

    /// `W(ξ) = −½ ln(φ_Λ / φ_{Λ=1})`.
    pub fn superpotential_reduced(&self, xi: f64) -> Result<f64> {
        let num = self.phi(xi)?.ln();
        let den = combo(&self.nu_eval, 1.0, 1.0, xi)?.ln();
        Ok(-0.5 * (num - den))
    }

    /// `Δ(ξ, c) = (cφ₁ − φ₂)/(φ₁ + cφ₂)`.
    pub fn delta(&self, xi: f64, c: f64) -> Result<f64> {
        let z = SQRT_2 * xi;
        let l1 = self.nu_eval.ln_abs(z)?;
        let l2 = self.nu_eval.ln_abs(-z)?;
        let r = (l2 - l1).exp();
        Ok(if r <= 1.0 {
            (c - r) / (1.0 + c * r)
        } else {
            (c / r - 1.0) / (1.0 / r + c)
        })
    }

    /// Scaled Wronskian `Wr/φ²` of the triple-well construction.
    pub fn wronskian_scaled(&self, xi: f64) -> Result<f64> {
        Ok(self.triple_local(xi)?.dh)
    }
}

/// Origin of a level of a constructed model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LevelOrigin {
    /// The level added at ε̄₁ (triple well ground state).
    AddedLower,
    /// The level added at ε̄.
    Added,
    Oscillator(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Level {
    pub energy: f64,
    pub origin: LevelOrigin,
}

/// Normalization bookkeeping for an added state: `N⁻²` closed form vs quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalizationRecord {
    pub origin: LevelOrigin,
    pub closed_form_inv_sq: f64,
    pub numeric_inv_sq: f64,
}

/// Sampled auxiliary functions on a grid (reduced coordinate).
#[derive(Clone, Debug)]
pub struct AuxSolution {
    pub xi: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub phi_lambda: Vec<f64>,
    /// Triple well only: `χ₁ = W[D_μ(√2ξ), φ]/φ`, `χ₂ = −W[D_μ(−√2ξ), φ]/φ`.
    pub chi1: Option<Vec<f64>>,
    pub chi2: Option<Vec<f64>>,
    pub chi: Option<Vec<f64>>,
}

/// Samples the auxiliary solutions; fails if `φ_Λ` or `χ` has a node.
pub fn aux_solution(params: &SusyParams, grid: &Grid1D) -> Result<AuxSolution> {
    let pot = SusyPotential::new(*params)?;
    let s = params.omega.sqrt();
    let xi: Vec<f64> = grid.points().iter().map(|x| s * x).collect();
    let mut out = AuxSolution {
        xi: xi.clone(),
        phi1: Vec::with_capacity(xi.len()),
        phi2: Vec::with_capacity(xi.len()),
        phi_lambda: Vec::with_capacity(xi.len()),
        chi1: None,
        chi2: None,
        chi: None,
    };
    let mut chis = params.is_triple().then(|| (Vec::new(), Vec::new(), Vec::new()));
    for (i, &x) in xi.iter().enumerate() {
        let p1 = combo(&pot.nu_eval, 1.0, 0.0, x)?;
        let p2 = combo(&pot.nu_eval, 0.0, 1.0, x)?;
        let phi = pot.phi(x)?;
        if !(phi.v > 0.0) {
            return Err(Error::Positivity { index: i, xi: x });
        }
        out.phi1.push(p1.value());
        out.phi2.push(p2.value());
        out.phi_lambda.push(phi.value());
        if let Some((c1, c2, c)) = chis.as_mut() {
            let ev = pot.mu_eval.as_ref().expect("triple-well evaluator");
            let g = phi.dlog();
            let m1 = combo(ev, 1.0, 0.0, x)?;
            let m2 = combo(ev, 0.0, 1.0, x)?;
            // W[a, φ]/φ = a g − a'
            let w1 = (m1.v * g - m1.d) * m1.scale.exp();
            let w2 = -(m2.v * g - m2.d) * m2.scale.exp();
            let total = w1 + params.lambda1 * w2;
            if !(total > 0.0) {
                return Err(Error::Positivity { index: i, xi: x });
            }
            c1.push(w1);
            c2.push(w2);
            c.push(total);
        }
    }
    if let Some((c1, c2, c)) = chis {
        out.chi1 = Some(c1);
        out.chi2 = Some(c2);
        out.chi = Some(c);
    }
    Ok(out)
}

/// Sampled superpotential `W(ξ)` on the nodes of `grid` (double-well mode).
pub fn superpotential(params: &SusyParams, grid: &Grid1D) -> Result<Vec<f64>> {
    if params.is_triple() {
        return Err(Error::domain("superpotential is defined for the double-well construction"));
    }
    let pot = SusyPotential::new(*params)?;
    let s = params.omega.sqrt();
    grid.points()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let xi = s * x;
            let w = pot.superpotential_reduced(xi)?;
            if !w.is_finite() {
                return Err(Error::Positivity { index: i, xi });
            }
            Ok(w)
        })
        .collect()
}

/// Closed form of `∫_a^b W{y₁,y₂} / (A₁y₁ + A₂y₂)² dt` for the cylinder pair
/// `y₁ = D_ν(√2t)`, `y₂ = D_ν(−√2t)`.
pub fn wronskian_ratio_integral(ev: &CylinderEvaluator, a1: f64, a2: f64, a: f64, b: f64) -> Result<f64> {
    let ratio = |t: f64| -> Result<f64> {
        let z = SQRT_2 * t;
        let l1 = ev.ln_abs(z)?;
        let l2 = ev.ln_abs(-z)?;
        let m = l1.max(l2);
        let y1 = (l1 - m).exp();
        let y2 = (l2 - m).exp();
        Ok((a2 * y1 - a1 * y2) / (a1 * y1 + a2 * y2))
    };
    Ok(-(ratio(b)? - ratio(a)?) / (a1 * a1 + a2 * a2))
}

/// A constructed model: potential, levels and normalized states on a grid.
#[derive(Clone, Debug)]
pub struct SolvableModel {
    pub params: SusyParams,
    pub family: Family,
    pub grid: Grid1D,
    /// Physical potential at the grid nodes.
    pub potential: Vec<f64>,
    /// Levels in the unshifted oscillator reference, ascending.
    pub levels: Vec<Level>,
    /// States in the order of `levels`.
    pub states: Vec<WaveFunction>,
    pub normalization: Vec<NormalizationRecord>,
    evaluator: std::sync::Arc<SusyPotential>,
}

impl SolvableModel {
    pub fn evaluator(&self) -> std::sync::Arc<SusyPotential> {
        self.evaluator.clone()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    /// Energies counted from the level added at ε.
    pub fn energies_from_added(&self) -> Vec<f64> {
        let eps = self.params.omega * self.params.eps_bar;
        self.levels.iter().map(|l| l.energy - eps).collect()
    }

    /// `‖(H − E)ψ‖/‖ψ‖` for every stored state.
    pub fn residuals(&self) -> Vec<f64> {
        self.states
            .iter()
            .zip(&self.levels)
            .map(|(s, l)| residual_norm(s, &self.potential, l.energy, 1.0))
            .collect()
    }

    /// Interval between the two barrier tops enclosing the central minimum.
    pub fn central_well(&self) -> Option<(f64, f64)> {
        let u = &self.potential;
        let xs = self.grid.points();
        let n = u.len();
        let centre = xs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)?;
        // walk downhill to the local minimum nearest the origin
        let mut m = centre;
        while m > 0 && m + 1 < n && (u[m - 1] < u[m] || u[m + 1] < u[m]) {
            m = if u[m - 1] < u[m + 1] { m - 1 } else { m + 1 };
        }
        let mut l = m;
        while l > 0 && u[l - 1] >= u[l] {
            l -= 1;
        }
        let mut r = m;
        while r + 1 < n && u[r + 1] >= u[r] {
            r += 1;
        }
        if l == 0 || r + 1 == n {
            return None;
        }
        Some((xs[l], xs[r]))
    }

    /// Probability of state `index` inside `[a, b]`.
    pub fn probability_in(&self, index: usize, a: f64, b: f64) -> Result<f64> {
        let s = self.states.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.states.len(),
        })?;
        let dx = self.grid.dx();
        Ok(self
            .grid
            .points()
            .iter()
            .zip(s.values())
            .filter(|(x, _)| **x >= a && **x <= b)
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            * dx)
    }

    /// CSV columns: x, U, ψ₀, ψ₁, …
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "x,U")?;
        for i in 0..self.states.len() {
            write!(out, ",psi{i}")?;
        }
        writeln!(out)?;
        for (j, x) in self.grid.points().iter().enumerate() {
            write!(out, "{x:.17e},{:.17e}", self.potential[j])?;
            for s in &self.states {
                write!(out, ",{:.17e}", s.values()[j].re)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            params: self.params,
            nu: self.params.nu(),
            mu: self.params.mu(),
            family: self.family,
            levels: self.levels.clone(),
            normalization: self.normalization.clone(),
        }
    }
}

/// Serializable summary of a model.
#[derive(Clone, Debug, Serialize)]
pub struct ModelDescriptor {
    pub params: SusyParams,
    pub nu: f64,
    pub mu: Option<f64>,
    pub family: Family,
    pub levels: Vec<Level>,
    pub normalization: Vec<NormalizationRecord>,
}

fn check_grid(params: &SusyParams, grid: &Grid1D) -> Result<()> {
    let s = params.omega.sqrt();
    let reach = s * grid.x_min.abs().max(grid.x_max.abs()) * SQRT_2;
    if reach > crate::specfun::Z_LIMIT {
        return Err(Error::domain(format!(
            "grid reaches |ξ| = {:.2}; cylinder functions are limited to |ξ| ≤ {:.2}",
            reach / SQRT_2,
            crate::specfun::Z_LIMIT / SQRT_2
        )));
    }
    Ok(())
}

/// Normalizes reduced-coordinate samples as a physical wave function.
fn finish_state(grid: &Grid1D, omega: f64, reduced: Vec<f64>) -> Result<(WaveFunction, f64)> {
    let scale = omega.powf(0.25);
    let values: Vec<f64> = reduced.iter().map(|v| v * scale).collect();
    let mut psi = WaveFunction::from_real(*grid, &values)?;
    let n2 = psi.norm_squared();
    if (n2 - 1.0).abs() > NORM_TOL || !n2.is_finite() {
        return Err(Error::GridTooSmall {
            deviation: (n2 - 1.0).abs(),
        });
    }
    psi.normalize()?;
    Ok((psi, n2))
}

/// Default physical grid: `|ξ| ≤ 25` with `2^12` nodes.
pub fn default_grid(omega: f64) -> Result<Grid1D> {
    Grid1D::symmetric(DEFAULT_HALF_WIDTH / omega.sqrt(), DEFAULT_EXPONENT)
}

/// Double-well model with the zero mode at ε and `n_ho_states` oscillator levels.
pub fn build_double_well(params: &SusyParams, grid: &Grid1D, n_ho_states: usize) -> Result<SolvableModel> {
    if params.is_triple() {
        return Err(Error::domain("parameters describe a triple well"));
    }
    if n_ho_states == 0 {
        return Err(Error::domain("at least one oscillator level is required"));
    }
    params.validate()?;
    check_grid(params, grid)?;
    let pot = std::sync::Arc::new(SusyPotential::new(*params)?);
    let omega = params.omega;
    let s = omega.sqrt();
    let xi: Vec<f64> = grid.points().iter().map(|x| s * x).collect();
    let nu = params.nu();
    let eps = params.eps_bar;

    let mut ln_phi = Vec::with_capacity(xi.len());
    let mut g = Vec::with_capacity(xi.len());
    let mut potential = Vec::with_capacity(xi.len());
    for (i, &x) in xi.iter().enumerate() {
        let p = pot.phi(x)?;
        if !(p.v > 0.0) {
            return Err(Error::Positivity { index: i, xi: x });
        }
        let gi = p.dlog();
        ln_phi.push(p.ln());
        g.push(gi);
        potential.push(omega * (gi * gi - 0.5 * x * x + 2.0 * nu + 1.0));
    }

    let w_pair = 2.0 * PI.sqrt() / gamma(-nu);
    let inv_sq = params.lambda * w_pair;
    let zero: Vec<f64> = ln_phi.iter().map(|l| inv_sq.sqrt() * (-l).exp()).collect();
    let (zero_state, n2) = finish_state(grid, omega, zero)?;

    let mut levels = vec![Level {
        energy: omega * eps,
        origin: LevelOrigin::Added,
    }];
    let mut states = vec![zero_state];
    let normalization = vec![NormalizationRecord {
        origin: LevelOrigin::Added,
        closed_form_inv_sq: inv_sq,
        numeric_inv_sq: inv_sq / n2,
    }];

    for n in 0..n_ho_states {
        let e = n as f64 + 0.5;
        let norm = (2.0 * (e - eps)).sqrt();
        let vals: Vec<f64> = xi
            .iter()
            .zip(&g)
            .map(|(&x, &gi)| {
                let (p, dp) = oscillator_function_with_derivative(n, x, 1.0);
                (p * gi - dp) / norm
            })
            .collect();
        let (st, _) = finish_state(grid, omega, vals)?;
        levels.push(Level {
            energy: omega * e,
            origin: LevelOrigin::Oscillator(n),
        });
        states.push(st);
    }

    Ok(SolvableModel {
        params: *params,
        family: Family::of(params),
        grid: *grid,
        potential,
        levels,
        states,
        normalization,
        evaluator: pot,
    })
}

/// Triple-well model: levels ε₁, ε and `n_ho_states` oscillator levels.
pub fn build_triple_well(params: &SusyParams, grid: &Grid1D, n_ho_states: usize) -> Result<SolvableModel> {
    let mu = params
        .mu()
        .ok_or_else(|| Error::domain("parameters describe a double well"))?;
    if n_ho_states == 0 {
        return Err(Error::domain("at least one oscillator level is required"));
    }
    params.validate()?;
    check_grid(params, grid)?;
    let pot = std::sync::Arc::new(SusyPotential::new(*params)?);
    let omega = params.omega;
    let s = omega.sqrt();
    let xi: Vec<f64> = grid.points().iter().map(|x| s * x).collect();
    let nu = params.nu();
    let eps = params.eps_bar;
    let eps1 = params.eps1_bar.unwrap_or(mu + 0.5);
    let c = 2.0 * (mu - nu);

    let mut local = Vec::with_capacity(xi.len());
    let mut potential = Vec::with_capacity(xi.len());
    let mut sign = 0.0;
    for (i, &x) in xi.iter().enumerate() {
        let t = pot.triple_local(x)?;
        if !(t.dh.abs() > 0.0) || !t.dh.is_finite() || (sign != 0.0 && t.dh.signum() != sign) {
            return Err(Error::Positivity { index: i, xi: x });
        }
        sign = t.dh.signum();
        let rho = t.fh / t.dh;
        let sigma = (t.fph + t.fh * t.g) / t.dh;
        potential.push(omega * (0.5 * x * x - c * (sigma - c * rho * rho)));
        local.push(t);
    }

    // Ψ₀ = N₀ φ/Wr = N₀ / (φ D̂),  Ψ₁ = N₁ f/Wr = N₁ f̂ / (φ D̂)
    let gap = nu - mu;
    let inv_sq0 = params.lambda1 * 4.0 * gap * PI.sqrt() / gamma(-mu);
    let inv_sq1 = params.lambda * 4.0 * gap * PI.sqrt() / gamma(-nu);
    let ground: Vec<f64> = local
        .iter()
        .map(|t| inv_sq0.sqrt() * sign / t.dh * (-t.ln_phi).exp())
        .collect();
    let first: Vec<f64> = local
        .iter()
        .map(|t| inv_sq1.sqrt() * sign * t.fh / t.dh * (-t.ln_phi).exp())
        .collect();
    let (s0, n0) = finish_state(grid, omega, ground)?;
    let (s1, n1) = finish_state(grid, omega, first)?;

    let mut levels = vec![
        Level {
            energy: omega * eps1,
            origin: LevelOrigin::AddedLower,
        },
        Level {
            energy: omega * eps,
            origin: LevelOrigin::Added,
        },
    ];
    let mut states = vec![s0, s1];
    let normalization = vec![
        NormalizationRecord {
            origin: LevelOrigin::AddedLower,
            closed_form_inv_sq: inv_sq0,
            numeric_inv_sq: inv_sq0 / n0,
        },
        NormalizationRecord {
            origin: LevelOrigin::Added,
            closed_form_inv_sq: inv_sq1,
            numeric_inv_sq: inv_sq1 / n1,
        },
    ];

    for n in 0..n_ho_states {
        let e = n as f64 + 0.5;
        let a = 2.0 * (e - eps1);
        let b = 2.0 * (e - eps);
        let norm = 2.0 * ((e - eps) * (e - eps1)).sqrt();
        let vals: Vec<f64> = xi
            .iter()
            .zip(&local)
            .map(|(&x, t)| {
                let (p, dp) = oscillator_function_with_derivative(n, x, 1.0);
                (b * p * t.fph - a * p * t.fh * t.g + (a - b) * t.fh * dp) / (t.dh * norm)
            })
            .collect();
        let (st, _) = finish_state(grid, omega, vals)?;
        levels.push(Level {
            energy: omega * e,
            origin: LevelOrigin::Oscillator(n),
        });
        states.push(st);
    }

    Ok(SolvableModel {
        params: *params,
        family: Family::of(params),
        grid: *grid,
        potential,
        levels,
        states,
        normalization,
        evaluator: pot,
    })
}

/// Builds either model depending on the parameters.
pub fn build_model(params: &SusyParams, grid: &Grid1D, n_ho_states: usize) -> Result<SolvableModel> {
    if params.is_triple() {
        build_triple_well(params, grid, n_ho_states)
    } else {
        build_double_well(params, grid, n_ho_states)
    }
}

/// Normalized state for level `level_index` of the model.
pub fn susy_state(model: &SolvableModel, level_index: usize) -> Result<WaveFunction> {
    model
        .states
        .get(level_index)
        .cloned()
        .ok_or(Error::IndexOutOfRange {
            index: level_index,
            len: model.states.len(),
        })
}

/// Sign changes of a real sampled function, ignoring tails below `rel_floor·max`.
pub fn count_nodes(values: &[f64], rel_floor: f64) -> usize {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut last = 0.0;
    let mut count = 0;
    for &v in values {
        if v.abs() <= rel_floor * max {
            continue;
        }
        if last != 0.0 && v.signum() != last {
            count += 1;
        }
        last = v.signum();
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner_product;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn small_grid() -> Grid1D {
        Grid1D::symmetric(12.0, 11).unwrap()
    }

    fn real(psi: &WaveFunction) -> Vec<f64> {
        psi.values().iter().map(|v| v.re).collect()
    }

    #[test]
    fn params_validation() {
        assert!(SusyParams::double_well(0.0, 1.0).validate().is_err());
        assert!(SusyParams::double_well(-3.0, 0.0).validate().is_err());
        assert!(SusyParams::triple_well(-1.0, -0.5, 1.0, 1.0).validate().is_err());
        let degenerate = SusyParams::triple_well(-1.0, -1.0, 1.0, 1.0);
        assert!(matches!(degenerate.validate(), Err(Error::Construction(_))));
        let g = small_grid();
        assert!(matches!(build_triple_well(&degenerate, &g, 2), Err(Error::Construction(_))));
    }

    #[test]
    fn superpotential_examples() {
        let g = small_grid();
        let w = superpotential(&SusyParams::double_well(-3.0, 1.0), &g).unwrap();
        assert!(w.iter().all(|v| v.abs() < 1e-15));

        let pot = SusyPotential::new(SusyParams::double_well(-3.0, 0.5)).unwrap();
        let w0 = pot.superpotential_reduced(0.0).unwrap();
        assert_relative_eq!(w0, -0.5 * 0.75f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(w0, 0.143_841_036_225_890_5, max_relative = 1e-12);

        // the growing branch Λφ₂ dominates at +∞, φ₁ at −∞
        let span = pot.superpotential_reduced(25.0).unwrap() - pot.superpotential_reduced(-25.0).unwrap();
        assert!((span - (-0.5 * 0.5f64.ln())).abs() < 1e-4);
    }

    #[test]
    fn delta_at_infinity() {
        let pot = SusyPotential::new(SusyParams::double_well(-3.0, 1.0)).unwrap();
        assert!((pot.delta(25.0, 1.0).unwrap() + 1.0).abs() < 1e-4);
        assert!((pot.delta(-25.0, 1.0).unwrap() - 1.0).abs() < 1e-4);
        assert_eq!(pot.delta(0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn double_well_spectrum_and_states() {
        let g = small_grid();
        let m = build_double_well(&SusyParams::double_well(-3.0, 1.0), &g, 6).unwrap();
        assert_eq!(m.family, Family::Hmm);
        let e = m.energies();
        assert_eq!(e[0], -2.5);
        assert_eq!(&e[1..4], &[0.5, 1.5, 2.5]);
        // zero mode: even, nodeless
        let z = real(&m.states[0]);
        assert_eq!(count_nodes(&z, 1e-10), 0);
        let n = z.len();
        for j in 1..n / 2 {
            assert!((z[j] - z[n - j]).abs() < 1e-12);
        }
        for (k, s) in m.states.iter().enumerate() {
            assert_eq!(count_nodes(&real(s), 1e-8), k, "state {k}");
        }
        for r in m.residuals() {
            assert!(r < 1e-6, "residual {r}");
        }
    }

    #[test]
    fn zero_mode_normalization_matches_closed_form() {
        let g = small_grid();
        for lambda in [1.0, 0.5, 0.05] {
            let m = build_double_well(&SusyParams::double_well(-3.0, lambda), &g, 2).unwrap();
            let rec = m.normalization[0];
            assert_relative_eq!(rec.numeric_inv_sq, rec.closed_form_inv_sq, max_relative = 1e-9);
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let g = small_grid();
        for p in [SusyParams::double_well(-3.0, 0.5), SusyParams::triple_well(-0.02, -1.0, 0.05, 1.0)] {
            let m = build_model(&p, &g, 6).unwrap();
            for (i, a) in m.states.iter().enumerate() {
                for (j, b) in m.states.iter().enumerate() {
                    let ip = inner_product(a, b).unwrap();
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((ip.re - target).abs() < 1e-6 && ip.im.abs() < 1e-12, "{i},{j}: {ip}");
                }
            }
        }
    }

    #[test]
    fn form_invariance_and_mirror() {
        let hmm = SusyPotential::new(SusyParams::double_well(-3.0, 1.0)).unwrap();
        let hpp = SusyPotential::new(SusyParams {
            lambda: 1.0,
            ..SusyParams::double_well(-3.0, 0.5)
        })
        .unwrap();
        let a = SusyPotential::new(SusyParams::double_well(-3.0, 0.5)).unwrap();
        let b = SusyPotential::new(SusyParams::double_well(-3.0, 2.0)).unwrap();
        for k in -40..=40 {
            let xi = 0.25 * k as f64;
            assert!((hmm.value_reduced(xi).unwrap() - hpp.value_reduced(xi).unwrap()).abs() < 1e-12);
            assert!((a.value_reduced(xi).unwrap() - b.value_reduced(-xi).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn potential_matches_log_second_derivative() {
        // U = ½ξ² − (ln φ)'' by finite differences of ln φ
        let pot = SusyPotential::new(SusyParams::double_well(-3.0, 0.5)).unwrap();
        let h = 1e-3;
        for &xi in &[-2.0, -0.3, 0.0, 1.7] {
            let l = |t: f64| pot.log_phi(t).unwrap().0;
            let d2 = (l(xi + h) - 2.0 * l(xi) + l(xi - h)) / (h * h);
            assert!((pot.value_reduced(xi).unwrap() - (0.5 * xi * xi - d2)).abs() < 1e-5);
        }
    }

    #[test]
    fn potential_derivatives_match_differences() {
        let h = 1e-5;
        for p in [SusyParams::double_well(-3.0, 0.5), SusyParams::triple_well(-0.02, -1.0, 0.05, 1.0)] {
            let pot = SusyPotential::new(p).unwrap();
            for &xi in &[-3.1, -0.4, 0.2, 2.2] {
                let fd = (pot.value_reduced(xi + h).unwrap() - pot.value_reduced(xi - h).unwrap()) / (2.0 * h);
                let d = pot.derivative_reduced(xi).unwrap();
                assert!((d - fd).abs() < 1e-6 * d.abs().max(1.0), "{p:?} ξ={xi}: {d} vs {fd}");
            }
        }
    }

    #[test]
    fn asymptotic_shape() {
        let pot = SusyPotential::new(SusyParams::double_well(-3.0, 0.5)).unwrap();
        for &xi in &[-25.0, 25.0] {
            let u = pot.value_reduced(xi).unwrap();
            assert!((u - (0.5 * xi * xi - 1.0)).abs() < 0.05);
        }
    }

    #[test]
    fn wronskian_integral_identity() {
        let ev = CylinderEvaluator::new(-2.5).unwrap();
        let w = crate::specfun::wronskian_pair(-2.5).unwrap();
        for (a1, a2) in [(1.0, 1.0), (1.0, 0.3), (0.7, 2.0)] {
            let (a, b) = (-3.0, 2.0);
            let n = 4000;
            let h = (b - a) / n as f64;
            let f = |t: f64| {
                let y1 = ev.value(SQRT_2 * t).unwrap();
                let y2 = ev.value(-SQRT_2 * t).unwrap();
                w / (a1 * y1 + a2 * y2).powi(2)
            };
            let mut acc = f(a) + f(b);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
            }
            let quad = acc * h / 3.0;
            let closed = wronskian_ratio_integral(&ev, a1, a2, a, b).unwrap();
            assert!((quad - closed).abs() < 1e-8 * closed.abs().max(1.0), "{quad} vs {closed}");
        }
    }

    #[test]
    fn triple_well_states() {
        let g = small_grid();
        let p = SusyParams::triple_well(-0.02, -1.0, 1.0, 1.0);
        let m = build_triple_well(&p, &g, 6).unwrap();
        assert_eq!(m.family, Family::TripleHmm);
        assert_eq!(m.energies()[..3], [-0.5, 0.48, 0.5]);
        for (k, s) in m.states.iter().enumerate() {
            assert_eq!(count_nodes(&real(s), 1e-8), k, "state {k}");
        }
        for r in m.residuals() {
            assert!(r < 1e-6, "residual {r}");
        }
        for rec in &m.normalization {
            assert_relative_eq!(rec.numeric_inv_sq, rec.closed_form_inv_sq, max_relative = 1e-8);
        }
        let (a, b) = m.central_well().unwrap();
        assert!(a < 0.0 && b > 0.0);
        assert!(m.probability_in(0, a, b).unwrap() > 0.9);
    }

    #[test]
    fn chi_asymptotics() {
        let g = Grid1D::symmetric(25.0, 12).unwrap();
        let aux = aux_solution(&SusyParams::triple_well(-0.02, -1.0, 1.0, 1.0), &g).unwrap();
        let c1 = aux.chi1.unwrap();
        let c2 = aux.chi2.unwrap();
        let n = c1.len();
        assert!(c1.iter().chain(&c2).all(|v| *v > 0.0));
        assert!(c1[n - 1] < 1e-100 && c1[0] > 1e100);
        assert!(c2[0] < 1e-100 && c2[n - 1] > 1e100);
    }

    /// Candidate excited state as printed for the triple well, with the
    /// coefficient `κ` left free: `ψ + κ f W[ψ, φ]/W[f, φ]`.
    fn printed_form(m: &SolvableModel, n: usize, kappa: f64) -> Vec<f64> {
        let pot = m.evaluator();
        m.grid
            .points()
            .iter()
            .map(|&x| {
                let t = pot.triple_local(x).unwrap();
                let (p, dp) = oscillator_function_with_derivative(n, x, 1.0);
                // W[ψ, φ]/W[f, φ] = (ψ g − ψ') / (φ D̂)
                p + kappa * t.fh * (p * t.g - dp) / t.dh
            })
            .collect()
    }

    #[test]
    fn printed_excited_state_coefficient() {
        let g = small_grid();
        let p = SusyParams::triple_well(-0.02, -1.0, 0.05, 1.0);
        let m = build_triple_well(&p, &g, 4).unwrap();
        let (eps, eps1) = (p.eps_bar, p.eps1_bar.unwrap());
        for n in 1..4 {
            let e = n as f64 + 0.5;
            let resid = |kappa: f64| {
                let v = printed_form(&m, n, kappa);
                let psi = WaveFunction::from_real(g, &v).unwrap();
                residual_norm(&psi, &m.potential, e, 1.0)
            };
            assert!(resid((eps - eps1) / (e - eps)) < 1e-6);
            assert!(resid((eps - eps1) / (e - eps1)) > 1e-3);
        }
    }

    #[test]
    fn grid_beyond_cylinder_range_rejected() {
        let wide = Grid1D::symmetric(50.0, 10).unwrap();
        assert!(matches!(
            build_triple_well(&SusyParams::triple_well(-0.02, -1.0, 1.0, 1.0), &wide, 2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn too_small_grid_detected() {
        let g = Grid1D::symmetric(2.0, 10).unwrap();
        let r = build_double_well(&SusyParams::double_well(-0.02, 1.0), &g, 3);
        assert!(matches!(r, Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn state_index_checked() {
        let m = build_double_well(&SusyParams::double_well(-3.0, 1.0), &small_grid(), 2).unwrap();
        assert!(susy_state(&m, 2).is_ok());
        assert!(matches!(susy_state(&m, 3), Err(Error::IndexOutOfRange { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn zero_mode_residual(nu in -4.0f64..-0.05, lambda in 0.05f64..5.0) {
            let m = build_double_well(&SusyParams::double_well(nu, lambda), &small_grid(), 1).unwrap();
            prop_assert!(m.residuals()[0] < 1e-6);
        }

        #[test]
        fn mirror_symmetry(lambda in 0.05f64..5.0, xi in -6.0f64..6.0) {
            let a = SusyPotential::new(SusyParams::triple_well(-0.02, -1.0, lambda, 1.0 / lambda)).unwrap();
            let b = SusyPotential::new(SusyParams::triple_well(-0.02, -1.0, 1.0 / lambda, lambda)).unwrap();
            prop_assert!((a.value_reduced(xi).unwrap() - b.value_reduced(-xi).unwrap()).abs() < 1e-9);
        }
    }
}
