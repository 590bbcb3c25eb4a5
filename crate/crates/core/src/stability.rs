//! Plant- and string-stability analysis in the (lambda, eta) plane.
//!
//! The characteristic function of the delayed closed loop is
//! `Theta(s) = s^2 + eta s e^{-tau s} + lambda e^{-tau s}`. Plant stability
//! holds iff every root has negative real part; the boundary in the
//! (lambda, eta) plane is the curve `lambda = w^2 cos(tau w)`,
//! `eta = w sin(tau w)` for `tau w` in (0, pi/2). String stability is the
//! frequency-domain condition |H(jw)| < 1 on the spacing-error transfer
//! function, decided exactly through the quartic-like form `Xi(w)`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{derive_lambda_eta, ControlGains, LambdaEta, StabilityVerdict};

/// One sample of the stability boundary curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DCurvePoint {
    pub w: f64,
    pub lambda: f64,
    pub eta: f64,
}

/// Frequency grid for the exact string-stability sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySweepConfig {
    pub w_min: f64,
    pub w_max: f64,
    pub step: f64,
}

pub const DEFAULT_SWEEP_STEP: f64 = 1e-3;
const BISECTION_MAX_ITER: usize = 200;
const BISECTION_TOL: f64 = 1e-12;

/// Corner of the plant-stability region: (lambda, eta) = (0, pi/(2 tau)).
pub fn corner_eta(tau: f64) -> f64 {
    std::f64::consts::PI / (2.0 * tau)
}

/// Boundary-curve parameterization at frequency `w`.
pub fn dcurve_point(w: f64, tau: f64) -> Result<DCurvePoint> {
    let limit = corner_eta(tau);
    if !(w > 0.0 && w < limit) {
        return Err(Error::FrequencyOutOfDomain { w, limit, tau });
    }
    Ok(DCurvePoint { w, lambda: w * w * (tau * w).cos(), eta: w * (tau * w).sin() })
}

/// Solve `w sin(tau w) = eta` on (0, pi/(2 tau)) by bisection; the map is
/// strictly increasing there. Returns the critical frequency w*.
fn critical_frequency(eta: f64, tau: f64) -> Result<f64> {
    let mut lo = 0.0f64;
    let mut hi = corner_eta(tau);
    let f = |w: f64| w * (tau * w).sin() - eta;
    let mut residual = f64::INFINITY;
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        residual = fm.abs();
        if residual < BISECTION_TOL || hi - lo < f64::EPSILON * hi {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionDiverged { iterations: BISECTION_MAX_ITER, residual })
}

/// Plant-stability membership test for a reduced gain pair.
///
/// For `eta >= pi/(2 tau)` the pair is outside the region outright.
/// Otherwise the critical `lambda* = w*^2 cos(tau w*)` at the curve point
/// with matching eta decides: stable iff `lambda < lambda*` (strict; the
/// boundary itself carries a purely imaginary root). The margin is
/// `lambda* - lambda` and lambda* is returned as witness either way.
pub fn plant_stability_check(le: &LambdaEta, tau: f64) -> Result<StabilityVerdict> {
    if le.lambda <= 0.0 || le.eta <= 0.0 {
        return Err(Error::NonPositive { name: "lambda/eta", value: le.lambda.min(le.eta) });
    }
    if tau <= 0.0 {
        return Err(Error::NonPositive { name: "tau", value: tau });
    }
    let corner = corner_eta(tau);
    if le.eta >= corner {
        return Ok(StabilityVerdict { stable: false, margin: corner - le.eta, witness: None });
    }
    let w_star = critical_frequency(le.eta, tau)?;
    let lambda_star = w_star * w_star * (tau * w_star).cos();
    let margin = lambda_star - le.lambda;
    Ok(StabilityVerdict { stable: margin > 0.0, margin, witness: Some(lambda_star) })
}

/// Sample the boundary curve over w in (0, pi/(2 tau)) for plotting.
/// The open endpoints are approached but not included.
pub fn plant_region_boundary(tau: f64, n_points: usize) -> Result<Vec<DCurvePoint>> {
    if tau <= 0.0 {
        return Err(Error::NonPositive { name: "tau", value: tau });
    }
    assert!(n_points >= 2);
    let limit = corner_eta(tau);
    (1..=n_points)
        .map(|j| {
            let w = limit * j as f64 / (n_points as f64 + 1.0);
            dcurve_point(w, tau)
        })
        .collect()
}

/// Sufficient string-stability test: `lambda <= k_v k_vo` and
/// `eta <= 1/(2 tau)`, with the paper-side non-strict inequalities.
pub fn string_stability_sufficient(
    gains: &ControlGains,
    headway: f64,
    tau: f64,
) -> Result<StabilityVerdict> {
    if tau <= 0.0 {
        return Err(Error::NonPositive { name: "tau", value: tau });
    }
    let le = derive_lambda_eta(gains, headway)?;
    let lambda_margin = gains.k_v * gains.k_vo - le.lambda;
    let eta_margin = 0.5 / tau - le.eta;
    let margin = lambda_margin.min(eta_margin);
    Ok(StabilityVerdict { stable: margin >= 0.0, margin, witness: None })
}

/// Largest headway compatible with the sufficient string condition:
/// `(1/(2 tau) - k_v - k_vo) / k_x`. Errors when no positive headway exists.
pub fn max_headway(gains: &ControlGains, tau: f64) -> Result<f64> {
    gains.validate()?;
    if tau <= 0.0 {
        return Err(Error::NonPositive { name: "tau", value: tau });
    }
    let half_inv_tau = 0.5 / tau;
    let gain_sum = gains.k_v + gains.k_vo;
    if half_inv_tau <= gain_sum {
        return Err(Error::NoFeasibleHeadway { half_inv_tau, gain_sum });
    }
    Ok((half_inv_tau - gain_sum) / gains.k_x)
}

/// Bracketed w^2 coefficient of Xi:
/// `k_x^2 h^2 + 2 k_x (k_v + k_vo) h + k_vo^2 + 2 k_v k_vo`.
fn xi_quadratic_coeff(gains: &ControlGains, headway: f64) -> f64 {
    gains.k_x * gains.k_x * headway * headway
        + 2.0 * gains.k_x * (gains.k_v + gains.k_vo) * headway
        + gains.k_vo * gains.k_vo
        + 2.0 * gains.k_v * gains.k_vo
}

/// The sign-deciding form of the string condition:
///
/// `Xi(w) = w^4 - 2 eta sin(tau w) w^3 + C w^2 - 2 lambda cos(tau w) w^2
///          + k_xo^2 + 2 k_x k_xo`
///
/// with C the bracketed coefficient above. |H(jw)| < 1 iff Xi(w) > 0.
pub fn xi(w: f64, gains: &ControlGains, headway: f64, tau: f64) -> f64 {
    let le = LambdaEta {
        lambda: gains.k_x + gains.k_xo,
        eta: gains.k_x * headway + gains.k_v + gains.k_vo,
    };
    let w2 = w * w;
    w2 * w2 - 2.0 * le.eta * (tau * w).sin() * w2 * w + xi_quadratic_coeff(gains, headway) * w2
        - 2.0 * le.lambda * (tau * w).cos() * w2
        + gains.k_xo * gains.k_xo
        + 2.0 * gains.k_x * gains.k_xo
}

/// `Theta(jw) = -w^2 + (j eta w + lambda) e^{-j tau w}`.
pub fn theta_jw(w: f64, le: &LambdaEta, tau: f64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, -tau * w);
    Complex64::new(-w * w, 0.0) + Complex64::new(le.lambda, le.eta * w) * rot
}

/// Exact spacing-error transfer magnitude
/// `sqrt((k_v^2 w^2 + k_x^2) / (Xi(w) + k_v^2 w^2 + k_x^2))`.
/// Errors with a pole flag when |Theta(jw)|^2 nearly vanishes.
pub fn transfer_magnitude(w: f64, gains: &ControlGains, headway: f64, tau: f64) -> Result<f64> {
    let numerator = gains.k_v * gains.k_v * w * w + gains.k_x * gains.k_x;
    let denominator = xi(w, gains, headway, tau) + numerator;
    if denominator < 1e-12 {
        return Err(Error::TransferPole { w, theta_sq: denominator });
    }
    Ok((numerator / denominator).sqrt())
}

/// Sweep ceiling above which `Xi(w) >= w^4 - 2 eta w^3 - (2 lambda + |C|) w^2`
/// is positive by |sin| <= 1, |cos| <= 1, turning the finite sweep into a
/// complete decision procedure.
pub fn sweep_tail_bound(gains: &ControlGains, headway: f64) -> f64 {
    let le = LambdaEta {
        lambda: gains.k_x + gains.k_xo,
        eta: gains.k_x * headway + gains.k_v + gains.k_vo,
    };
    let c = xi_quadratic_coeff(gains, headway);
    2.0 * (le.eta + 1.0 + (2.0 * le.lambda + c).sqrt())
}

impl FrequencySweepConfig {
    /// Default grid covering (0, w_max] at the stock step.
    pub fn default_for(gains: &ControlGains, headway: f64) -> Self {
        Self { w_min: DEFAULT_SWEEP_STEP, w_max: sweep_tail_bound(gains, headway), step: DEFAULT_SWEEP_STEP }
    }
}

/// Exact string-stability decision: `Xi(w) > 0` at every sweep point plus the
/// analytic tail bound beyond `w_max`. The margin is the smallest Xi value
/// seen; the witness (when unstable) is the first violating frequency.
pub fn string_stability_exact(
    gains: &ControlGains,
    headway: f64,
    tau: f64,
    sweep: &FrequencySweepConfig,
) -> Result<StabilityVerdict> {
    gains.validate()?;
    if tau <= 0.0 {
        return Err(Error::NonPositive { name: "tau", value: tau });
    }
    let tail = sweep_tail_bound(gains, headway);
    assert!(
        sweep.w_max >= tail - 1e-9,
        "sweep w_max {} below the tail bound {tail}",
        sweep.w_max
    );
    let n = ((sweep.w_max - sweep.w_min) / sweep.step).ceil() as usize + 1;
    let mut min_xi = f64::INFINITY;
    let mut witness = None;
    for k in 0..n {
        let w = (sweep.w_min + k as f64 * sweep.step).min(sweep.w_max);
        let value = xi(w, gains, headway, tau);
        if value < min_xi {
            min_xi = value;
        }
        if value <= 0.0 && witness.is_none() {
            witness = Some(w);
        }
    }
    Ok(StabilityVerdict { stable: witness.is_none(), margin: min_xi, witness })
}

/// Search window and grid for the characteristic-root scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootSearchConfig {
    pub re_min: f64,
    pub re_max: f64,
    /// Imaginary ceiling; roots come in conjugate pairs so only Im >= 0 is
    /// scanned. When zero, defaults to 4 pi / tau.
    pub im_max: f64,
    pub grid: usize,
}

impl RootSearchConfig {
    pub fn default_for(tau: f64) -> Self {
        Self { re_min: -5.0, re_max: 1.0, im_max: 4.0 * std::f64::consts::PI / tau, grid: 400 }
    }

    /// Window guaranteed to contain every right-half-plane root: on
    /// `Re s = sigma > 0` a root needs `|s|^2 <= (eta |s| + lambda)`, so
    /// `sigma <= (eta + sqrt(eta^2 + 4 lambda)) / 2`.
    pub fn default_for_gains(le: &LambdaEta, tau: f64) -> Self {
        // The same inequality bounds |s| for those roots, so the imaginary
        // ceiling must cover it as well.
        let sigma_max = 0.5 * (le.eta + (le.eta * le.eta + 4.0 * le.lambda).sqrt());
        let base = Self::default_for(tau);
        Self {
            re_max: sigma_max.max(1.0) + 0.5,
            im_max: base.im_max.max(sigma_max + 0.5),
            ..base
        }
    }
}

/// Estimated spectral abscissa. `refined` is false when Newton polishing
/// failed everywhere and only the coarse grid estimate is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbscissaEstimate {
    pub value: f64,
    pub refined: bool,
}

fn theta_s(s: Complex64, le: &LambdaEta, tau: f64) -> Complex64 {
    s * s + (le.eta * s + le.lambda) * (-tau * s).exp()
}

fn theta_s_deriv(s: Complex64, le: &LambdaEta, tau: f64) -> Complex64 {
    let damp = (-tau * s).exp();
    2.0 * s + le.eta * damp - tau * (le.eta * s + le.lambda) * damp
}

/// Largest real part among characteristic roots found inside the window:
/// |Theta| is evaluated on the grid, local minima seed Newton iterations on
/// the analytic Theta(s), and the maximum real part of converged roots is
/// reported. Cross-validates [`plant_stability_check`] through an
/// independent route.
pub fn spectral_abscissa(le: &LambdaEta, tau: f64, search: &RootSearchConfig) -> Result<AbscissaEstimate> {
    if le.lambda <= 0.0 || le.eta <= 0.0 {
        return Err(Error::NonPositive { name: "lambda/eta", value: le.lambda.min(le.eta) });
    }
    let n = search.grid;
    assert!(n >= 8);
    let dx = (search.re_max - search.re_min) / (n - 1) as f64;
    let dy = search.im_max / (n - 1) as f64;

    let row_modulus = |row: usize| -> Vec<f64> {
        let y = row as f64 * dy;
        (0..n)
            .map(|col| {
                let s = Complex64::new(search.re_min + col as f64 * dx, y);
                theta_s(s, le, tau).norm_sqr()
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let modulus: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(row_modulus).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let modulus: Vec<Vec<f64>> = (0..n).map(row_modulus).collect();

    // Interior grid local minima seed the refinement.
    let mut seeds = Vec::new();
    for row in 1..n - 1 {
        for col in 1..n - 1 {
            let m = modulus[row][col];
            if m <= modulus[row - 1][col]
                && m <= modulus[row + 1][col]
                && m <= modulus[row][col - 1]
                && m <= modulus[row][col + 1]
            {
                seeds.push(Complex64::new(
                    search.re_min + col as f64 * dx,
                    row as f64 * dy,
                ));
            }
        }
    }
    // The real axis boundary can hold real roots; seed its minima too.
    for col in 1..n - 1 {
        let m = modulus[0][col];
        if m <= modulus[0][col - 1] && m <= modulus[0][col + 1] && m <= modulus[1][col] {
            seeds.push(Complex64::new(search.re_min + col as f64 * dx, 0.0));
        }
    }

    let slack = (dx.abs() + dy.abs()).max(0.5);
    let mut best: Option<f64> = None;
    for seed in seeds {
        let mut s = seed;
        let mut converged = false;
        for _ in 0..60 {
            let f = theta_s(s, le, tau);
            let df = theta_s_deriv(s, le, tau);
            if df.norm_sqr() < 1e-300 {
                break;
            }
            let step = f / df;
            s -= step;
            if step.norm() < 1e-13 {
                converged = true;
                break;
            }
        }
        if converged
            && theta_s(s, le, tau).norm() < 1e-8
            && s.re >= search.re_min - slack
            && s.re <= search.re_max + slack
        {
            best = Some(best.map_or(s.re, |b: f64| b.max(s.re)));
        }
    }

    match best {
        Some(value) => Ok(AbscissaEstimate { value, refined: true }),
        None => {
            // Fall back to the real part of the coarse grid minimum.
            let mut min = f64::INFINITY;
            let mut at = search.re_min;
            for (row, line) in modulus.iter().enumerate() {
                let _ = row;
                for (col, &m) in line.iter().enumerate() {
                    if m < min {
                        min = m;
                        at = search.re_min + col as f64 * dx;
                    }
                }
            }
            Ok(AbscissaEstimate { value: at, refined: false })
        }
    }
}

/// Export a boundary curve as CSV `w,lambda,eta`.
pub fn write_region_csv<W: Write>(points: &[DCurvePoint], out: &mut W) -> Result<()> {
    writeln!(out, "w,lambda,eta")?;
    for p in points {
        writeln!(out, "{},{},{}", p.w, p.lambda, p.eta)?;
    }
    Ok(())
}

/// Export a transfer-magnitude sweep as CSV `w,magnitude`.
pub fn write_sweep_csv<W: Write>(rows: &[(f64, f64)], out: &mut W) -> Result<()> {
    writeln!(out, "w,magnitude")?;
    for (w, magnitude) in rows {
        writeln!(out, "{w},{magnitude}")?;
    }
    Ok(())
}
