//! The perturbation function `k_ε` used for stable drivers and grid checks
//! of Hypotheses (H₁) for `β₁(y) = K|y|^{-1-α}` on `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One-sided difference quotients at the knots must agree this closely.
pub const C1_TOL: f64 = 1e-6;
/// Relative change of the `∫k²β₁` estimate at the last refinement.
pub const HYPINT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationParams {
    gamma: f64,
    eps: f64,
    alpha: f64,
    k1: f64,
    c: f64,
}

impl PerturbationParams {
    pub fn new(gamma: f64, eps: f64, alpha: f64, k1: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid("alpha", format!("{alpha} not in (0, 2)")));
        }
        if !(gamma > alpha / 2.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("need gamma > alpha/2 = {}", alpha / 2.0)));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(invalid("eps", format!("{eps} not in (0, 1/2)")));
        }
        if !(k1 >= 0.0 && k1.is_finite()) {
            return Err(invalid("k1", "must be non-negative"));
        }
        let c = (1.0 + gamma) * eps / ((1.0 + gamma) - eps * (1.0 + 2.0 * gamma));
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid("eps", "derived constant c is not positive"));
        }
        Ok(Self {
            gamma,
            eps,
            alpha,
            k1,
            c,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn c_derived(&self) -> f64 {
        self.c
    }

    /// `((1+K₁)(1+γ))^{-1/γ}`; the proof's estimate needs `ε` strictly below it.
    pub fn proof_threshold(&self) -> f64 {
        proof_threshold(self.gamma, self.k1)
    }

    pub fn at_or_above_threshold(&self) -> bool {
        self.eps >= self.proof_threshold()
    }

    fn pieces(&self, y: f64) -> Piece {
        let y = y.abs();
        if y <= self.eps {
            Piece::Power
        } else if y <= 2.0 * self.eps {
            Piece::Patch
        } else {
            Piece::Linear
        }
    }

    fn piece_value(&self, piece: Piece, y: f64) -> f64 {
        let (g, e, c) = (self.gamma, self.eps, self.c);
        match piece {
            Piece::Power => y.powf(1.0 + g),
            Piece::Patch => e.powf(1.0 + g) + (1.0 + g) * e.powf(g) * (y - e) - (1.0 + c) * (y - e).powf(1.0 + g),
            // Equal to (1+γ-c)ε^{1+γ} - c(1+γ)ε^γ(y-2ε) by the choice of c, and exactly 0 at y = 1.
            Piece::Linear => c * (1.0 + g) * e.powf(g) * (1.0 - y),
        }
    }

    fn piece_slope(&self, piece: Piece, y: f64) -> f64 {
        let (g, e, c) = (self.gamma, self.eps, self.c);
        match piece {
            Piece::Power => (1.0 + g) * y.powf(g),
            Piece::Patch => (1.0 + g) * e.powf(g) - (1.0 + c) * (1.0 + g) * (y - e).powf(g),
            Piece::Linear => -c * (1.0 + g) * e.powf(g),
        }
    }

    /// Bound on `sup_{a,λ}` from the proof's displayed estimate; infinite at or above the threshold.
    pub fn closed_form_ratio_bound(&self) -> f64 {
        closed_form_bound(self.gamma, self.eps, self.alpha, self.k1, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Power,
    Patch,
    Linear,
}

fn proof_threshold(gamma: f64, k1: f64) -> f64 {
    ((1.0 + k1) * (1.0 + gamma)).powf(-1.0 / gamma)
}

fn closed_form_bound(gamma: f64, eps: f64, alpha: f64, k1: f64, c: f64) -> f64 {
    let q = (1.0 + k1) * (1.0 + gamma) * eps.powf(gamma);
    if q >= 1.0 {
        return f64::INFINITY;
    }
    let bracket = (1.0 + alpha) * (1.0 + q).powf(alpha) * q
        + k1 * (2.0 + gamma) * eps.powf(1.0 + gamma)
        + (1.0 + k1) * (1.0 + gamma) * c.max(1.0) * eps.powf(gamma);
    bracket / (1.0 - q).powf(1.0 + alpha)
}

fn check_unit(y: f64) -> Result<()> {
    if !(y.abs() <= 1.0) {
        return Err(invalid("y", format!("{y} outside [-1, 1]")));
    }
    Ok(())
}

/// `k_ε(y)`, even in `y`.
pub fn k_eps(y: f64, params: &PerturbationParams) -> Result<f64> {
    check_unit(y)?;
    Ok(params.piece_value(params.pieces(y), y.abs()))
}

/// `k_ε′(y)`, odd in `y`.
pub fn k_eps_derivative(y: f64, params: &PerturbationParams) -> Result<f64> {
    check_unit(y)?;
    let slope = params.piece_slope(params.pieces(y), y.abs());
    Ok(if y < 0.0 { -slope } else { slope })
}

/// Sampling resolutions for [`verify_h1`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct H1Grids {
    /// `K` in `β₁(y) = K|y|^{-1-α}`.
    pub levy_density_constant: f64,
    pub y_points: usize,
    pub a_points: usize,
    pub lambda_points: usize,
    /// Trapezoid refinements for `∫k²β₁`, starting from 16 panels per piece.
    pub refinements: usize,
    /// Trial values of ε scanned for the empirical threshold of the ratio bound.
    pub threshold_scan: usize,
}

impl Default for H1Grids {
    fn default() -> Self {
        Self {
            levy_density_constant: 1.0,
            y_points: 20_001,
            a_points: 21,
            lambda_points: 41,
            refinements: 12,
            threshold_scan: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    /// Distance to the failing side; positive when the check passes.
    pub margin: f64,
    pub value: f64,
}

impl Check {
    /// Passes when `value < limit` (or `≤` if `inclusive`).
    fn below(name: &'static str, value: f64, limit: f64, inclusive: bool) -> Self {
        let pass = if inclusive { value <= limit } else { value < limit };
        Self {
            name,
            pass,
            margin: limit - value,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Report {
    pub params: PerturbationParams,
    pub checks: Vec<Check>,
    pub hypint_value: f64,
    pub max_sampled_ratio: f64,
    pub closed_form_ratio_bound: f64,
    pub proof_threshold: f64,
    /// `ε` sits at or above the proof's threshold.
    pub threshold_case: bool,
    /// Largest scanned ε up to which the sampled ratio stays ≤ 1/2.
    pub empirical_threshold: Option<f64>,
    /// Largest ε for which the closed-form bound is ≤ 1/2.
    pub closed_form_threshold: f64,
}

impl H1Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Points in `(0, 1]`: uniform, plus a geometric cluster near 0 and around the knots.
fn y_grid(params: &PerturbationParams, n: usize) -> Vec<f64> {
    let mut ys: Vec<f64> = linspace(0.0, 1.0, n).skip(1).collect();
    let geometric = (n / 10).max(50);
    ys.extend((0..geometric).map(|i| 10f64.powf(-10.0 + 10.0 * i as f64 / (geometric - 1) as f64)));
    for knot in [params.eps, 2.0 * params.eps] {
        ys.extend(linspace(0.9 * knot, 1.1 * knot, (n / 20).max(20)));
    }
    ys.retain(|y| *y > 0.0 && *y <= 1.0);
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    ys
}

/// The quantity bounded by 1/2 in (H₁), at one `(y, a, λ)`.
fn ratio(params: &PerturbationParams, y: f64, a: f64, lambda: f64) -> f64 {
    let piece = params.pieces(y);
    let k = params.piece_value(piece, y.abs());
    let dk = params.piece_slope(piece, y.abs()) * y.signum();
    let shifted = y + lambda * (1.0 + a * y) * k;
    let tilt = 1.0 + lambda * (a * k + (1.0 + a * y) * dk);
    // β₁ vanishes outside [-1, 1]; inside, β₁(shifted)/β₁(y) = |y/shifted|^{1+α}.
    let density_ratio = if shifted.abs() > 1.0 {
        0.0
    } else {
        (1.0 + lambda * (1.0 + a * y) * k / y).abs().powf(-1.0 - params.alpha)
    };
    (density_ratio * tilt - 1.0).abs() / lambda.abs()
}

fn lambda_grid(n: usize) -> Vec<f64> {
    let mut ls: Vec<f64> = linspace(-1.0, 1.0, n).filter(|l| l.abs() > 1e-12).collect();
    ls.extend([-1e-6, 1e-6]);
    ls
}

fn max_sampled_ratio(params: &PerturbationParams, ys: &[f64], a_points: usize, lambdas: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in linspace(-params.k1, params.k1, a_points) {
        for &l in lambdas {
            for &y in ys {
                // (y, a, λ) and (-y, -a, -λ) give the same value, so y > 0 suffices.
                worst = worst.max(ratio(params, y, a, l));
            }
        }
    }
    worst
}

/// Composite trapezoid of `k²β₁` over `[ε, 1]` (split at 2ε) with `panels` per piece,
/// plus the exact integral `K ε^{2+2γ-α}/(2+2γ-α)` of the power piece; doubled for `[-1, 0]`.
fn hypint(params: &PerturbationParams, k: f64, panels: usize) -> f64 {
    let (g, e, a) = (params.gamma, params.eps, params.alpha);
    let f = |y: f64| {
        let v = params.piece_value(params.pieces(y), y);
        v * v * k * y.powf(-1.0 - a)
    };
    let trap = |lo: f64, hi: f64| {
        let h = (hi - lo) / panels as f64;
        let inner: f64 = (1..panels).map(|i| f(lo + i as f64 * h)).sum();
        h * (0.5 * f(lo) + inner + 0.5 * f(hi))
    };
    let near = k * e.powf(2.0 + 2.0 * g - a) / (2.0 + 2.0 * g - a);
    2.0 * (near + trap(e, 2.0 * e) + trap(2.0 * e, 1.0))
}

fn difference_quotients(params: &PerturbationParams, knot: f64) -> (f64, f64) {
    let h = 1e-7 * knot;
    let at = |y: f64| params.piece_value(params.pieces(y), y);
    let left = (at(knot) - at(knot - h)) / h;
    let right = (at(knot + h) - at(knot)) / h;
    (left, right)
}

fn empirical_threshold(params: &PerturbationParams, grids: &H1Grids) -> Option<f64> {
    let coarse_y = (grids.y_points / 10).max(201);
    let lambdas = lambda_grid(grids.lambda_points.min(21));
    let mut last_ok = None;
    for e in (0..grids.threshold_scan).map(|i| {
        let t = i as f64 / (grids.threshold_scan - 1).max(1) as f64;
        1e-4 * (0.499 / 1e-4f64).powf(t)
    }) {
        let Ok(p) = PerturbationParams::new(params.gamma, e, params.alpha, params.k1) else {
            break;
        };
        let ys = y_grid(&p, coarse_y);
        if max_sampled_ratio(&p, &ys, grids.a_points.min(11), &lambdas) <= 0.5 {
            last_ok = Some(e);
        } else {
            break;
        }
    }
    last_ok
}

fn closed_form_threshold(params: &PerturbationParams) -> f64 {
    let bound = |e: f64| {
        let c = (1.0 + params.gamma) * e / ((1.0 + params.gamma) - e * (1.0 + 2.0 * params.gamma));
        closed_form_bound(params.gamma, e, params.alpha, params.k1, c)
    };
    let (mut lo, mut hi) = (0.0f64, proof_threshold(params.gamma, params.k1).min(0.5));
    if bound(hi * (1.0 - 1e-12)) <= 0.5 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) <= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Runs the (H₁) battery for `k_ε` and `β₁(y) = K|y|^{-1-α}`.
pub fn verify_h1(params: &PerturbationParams, grids: &H1Grids) -> Result<H1Report> {
    if !(grids.levy_density_constant > 0.0) {
        return Err(invalid("levy_density_constant", "must be positive"));
    }
    if grids.y_points < 101 || grids.a_points < 2 || grids.lambda_points < 3 || grids.refinements < 2 {
        return Err(invalid("grids", "resolutions too small"));
    }
    let p = params;
    let e = p.eps;
    let mut checks = Vec::new();

    let k_one = k_eps(1.0, p)?;
    checks.push(Check {
        name: "k_at_one_is_zero",
        pass: k_one == 0.0,
        margin: -k_one.abs(),
        value: k_one,
    });
    for (name, value_name, knot, left, right) in [
        ("c1_at_eps", "c0_at_eps", e, Piece::Power, Piece::Patch),
        ("c1_at_two_eps", "c0_at_two_eps", 2.0 * e, Piece::Patch, Piece::Linear),
    ] {
        let jump = (p.piece_value(left, knot) - p.piece_value(right, knot)).abs();
        checks.push(Check::below(value_name, jump, C1_TOL * knot.powf(1.0 + p.gamma), true));
        let (dl, dr) = difference_quotients(p, knot);
        checks.push(Check::below(name, (dl - dr).abs(), C1_TOL, true));
    }

    let ys = y_grid(p, grids.y_points);
    let ks: Vec<f64> = ys.iter().map(|&y| p.piece_value(p.pieces(y), y)).collect();
    let dks: Vec<f64> = ys.iter().map(|&y| p.piece_slope(p.pieces(y), y).abs()).collect();
    let min_k = ks.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "nonnegative",
        pass: min_k >= 0.0,
        margin: min_k,
        value: min_k,
    });
    let (argmax, max_k) = ks
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(i, m), (j, &v)| if v > m { (j, v) } else { (i, m) });
    let y_star = ys[argmax];
    checks.push(Check {
        name: "argmax_in_patch",
        pass: (e..=2.0 * e).contains(&y_star),
        margin: (y_star - e).min(2.0 * e - y_star),
        value: y_star,
    });
    let max_dk = dks.iter().copied().fold(0.0, f64::max);
    let max_k_over_y = ys.iter().zip(&ks).map(|(y, k)| k / y).fold(0.0, f64::max);
    let (g, c) = (p.gamma, p.c);
    checks.push(Check::below("majosk_k", max_k, (2.0 + g) * e.powf(1.0 + g), true));
    checks.push(Check::below("majosk_dk", max_dk, (1.0 + g) * c.max(1.0) * e.powf(g), true));
    checks.push(Check::below("majosk_k_over_y", max_k_over_y, (1.0 + g) * e.powf(g), true));
    let hb = 1.0 / (4.0 * (1.0 + p.k1));
    checks.push(Check::below("hypbound_k", max_k, hb, false));
    checks.push(Check::below("hypbound_dk", max_dk, hb, false));

    let mut estimates = Vec::with_capacity(grids.refinements);
    for r in 0..grids.refinements {
        estimates.push(hypint(p, grids.levy_density_constant, 16 << r));
    }
    let (prev, last) = (estimates[estimates.len() - 2], estimates[estimates.len() - 1]);
    let rel_change = (last - prev).abs() / last.abs();
    let hypint_ok = last.is_finite() && rel_change < HYPINT_TOL;
    checks.push(Check {
        name: "hypint_converged",
        pass: hypint_ok,
        margin: HYPINT_TOL - rel_change,
        value: rel_change,
    });

    let lambdas = lambda_grid(grids.lambda_points);
    let max_ratio = max_sampled_ratio(p, &ys, grids.a_points, &lambdas);
    checks.push(Check::below("hypborne_sampled", max_ratio, 0.5, true));
    let closed = p.closed_form_ratio_bound();
    checks.push(Check::below("hypborne_closed_form", closed, 0.5, true));
    let threshold = p.proof_threshold();
    checks.push(Check::below("eps_below_proof_threshold", e, threshold, false));

    Ok(H1Report {
        params: *p,
        checks,
        hypint_value: last,
        max_sampled_ratio: max_ratio,
        closed_form_ratio_bound: closed,
        proof_threshold: threshold,
        threshold_case: p.at_or_above_threshold(),
        empirical_threshold: empirical_threshold(p, grids),
        closed_form_threshold: closed_form_threshold(p),
    })
}
