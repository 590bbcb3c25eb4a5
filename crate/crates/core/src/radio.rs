//! V2I link budget and platoon-geometry planning: achievable ZF rate, RSU
//! coverage, stay time per cell, maximum stable-platoon velocity under the
//! handover constraint, and the dual-connectivity inter-site distance bound.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PlatoonConfig, RadioParams};

/// Coverage geometry of one RSU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    /// Coverage radius d_th in meters.
    pub d_th: f64,
    /// Longitudinal half-range ell_th in meters (0 when infeasible).
    pub ell_th: f64,
    /// False when d_th cannot even reach the lane (d_th^2 <= r_o^2 + h_o^2).
    pub feasible: bool,
}

/// ZF uplink rate at distance `d`:
/// `B log2(1 + P (N - M - 1) beta d^-alpha / sigma^2)` bps.
pub fn achievable_rate(rp: &RadioParams, d: f64) -> Result<f64> {
    rp.validate()?;
    if d <= 0.0 {
        return Err(Error::NonPositive { name: "distance", value: d });
    }
    let zf_gain = (rp.n_antennas - rp.m_followers - 1) as f64;
    let snr = rp.tx_power_watts() * zf_gain * rp.beta() * d.powf(-rp.path_loss_exp)
        / rp.noise_watts();
    Ok(rp.bandwidth_hz * (1.0 + snr).log2())
}

/// Radius at which the rate threshold is met exactly:
/// `(P (N - M - 1) beta / (sigma^2 (2^(R_th/B) - 1)))^(1/alpha)`.
/// The 1/alpha root is evaluated in log space so non-integer exponents stay
/// well conditioned.
pub fn coverage_radius(rp: &RadioParams) -> Result<f64> {
    rp.validate()?;
    let zf_gain = (rp.n_antennas - rp.m_followers - 1) as f64;
    let snr_required = 2f64.powf(rp.rate_threshold_bps / rp.bandwidth_hz) - 1.0;
    let ratio = rp.tx_power_watts() * zf_gain * rp.beta() / (rp.noise_watts() * snr_required);
    Ok((ratio.ln() / rp.path_loss_exp).exp())
}

/// Longitudinal half-range: `sqrt(d_th^2 - r_o^2 - h_o^2)` when real,
/// otherwise an infeasible result (not an error).
pub fn longitudinal_range(rp: &RadioParams) -> Result<CoverageResult> {
    let d_th = coverage_radius(rp)?;
    let lateral_sq = rp.perp_distance_m * rp.perp_distance_m + rp.elev_diff_m * rp.elev_diff_m;
    let chord_sq = d_th * d_th - lateral_sq;
    if chord_sq > 0.0 {
        Ok(CoverageResult { d_th, ell_th: chord_sq.sqrt(), feasible: true })
    } else {
        Ok(CoverageResult { d_th, ell_th: 0.0, feasible: false })
    }
}

/// Platoon length `M h v_o + M l` in meters.
pub fn platoon_length(pc: &PlatoonConfig) -> f64 {
    let m = pc.m_followers as f64;
    m * pc.headway * pc.target_velocity + m * pc.standstill
}

/// Time a stable platoon stays inside one coverage area:
/// `(2 ell_th^0 - D_platoon) / v_o`, with the leader's power deciding
/// `ell_th^0` (the leader exits first).
pub fn stay_time(pc: &PlatoonConfig, cov: &CoverageResult) -> Result<f64> {
    if !cov.feasible {
        return Err(Error::CoverageInfeasible { d_th: cov.d_th, min_range: cov.d_th });
    }
    let chord = 2.0 * cov.ell_th;
    let length = platoon_length(pc);
    if chord - length <= 0.0 {
        return Err(Error::PlatoonExceedsCoverage { length, chord });
    }
    Ok((chord - length) / pc.target_velocity)
}

/// Largest target velocity meeting the handover constraint:
/// `(2 ell_th^0 - M l) / (M h + 1/f_handover)`.
pub fn max_platoon_velocity(
    m_followers: usize,
    headway: f64,
    standstill: f64,
    rp: &RadioParams,
) -> Result<f64> {
    let cov = longitudinal_range(rp)?;
    if !cov.feasible {
        return Err(Error::CoverageInfeasible {
            d_th: cov.d_th,
            min_range: (rp.perp_distance_m * rp.perp_distance_m
                + rp.elev_diff_m * rp.elev_diff_m)
                .sqrt(),
        });
    }
    let m = m_followers as f64;
    let chord = 2.0 * cov.ell_th;
    let ml = m * standstill;
    if chord <= ml {
        return Err(Error::NoFeasibleVelocity { chord, ml });
    }
    Ok((chord - ml) / (m * headway + 1.0 / rp.handover_freq_hz))
}

/// Maximum inter-site longitudinal distance for seamless dual-connectivity
/// handover: `2 ell_th^0 - D_platoon`.
pub fn max_isld(pc: &PlatoonConfig, rp: &RadioParams) -> Result<f64> {
    let cov = longitudinal_range(rp)?;
    if !cov.feasible {
        return Err(Error::CoverageInfeasible {
            d_th: cov.d_th,
            min_range: (rp.perp_distance_m * rp.perp_distance_m
                + rp.elev_diff_m * rp.elev_diff_m)
                .sqrt(),
        });
    }
    let chord = 2.0 * cov.ell_th;
    let length = platoon_length(pc);
    if chord - length < 0.0 {
        return Err(Error::PlatoonExceedsSpan { chord, length });
    }
    Ok(chord - length)
}

/// One planner row for the Table-I-style report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerRow {
    pub carrier_freq_hz: f64,
    pub rate_threshold_bps: f64,
    pub handover_freq_hz: f64,
    pub d_th: f64,
    pub ell_th: f64,
    pub platoon_length: f64,
    pub v_max: f64,
    pub stay_time: f64,
    pub isld_max: f64,
}

/// Evaluate the full planner chain over a (f_c, f_handover) grid. Per row the
/// platoon velocity is set to the row's own v_max when computing length,
/// stay time and ISLD.
pub fn planner_report(
    base: &RadioParams,
    m_followers: usize,
    headway: f64,
    standstill: f64,
    carrier_freqs: &[f64],
    handover_freqs: &[f64],
) -> Result<Vec<PlannerRow>> {
    let mut rows = Vec::with_capacity(carrier_freqs.len() * handover_freqs.len());
    for &fc in carrier_freqs {
        for &fh in handover_freqs {
            let rp = RadioParams { carrier_freq_hz: fc, handover_freq_hz: fh, ..*base };
            let cov = longitudinal_range(&rp)?;
            let v_max = max_platoon_velocity(m_followers, headway, standstill, &rp)?;
            let pc = PlatoonConfig {
                m_followers,
                headway,
                standstill,
                target_velocity: v_max,
                delay: 1.0, // irrelevant to the link budget
            };
            let length = platoon_length(&pc);
            rows.push(PlannerRow {
                carrier_freq_hz: fc,
                rate_threshold_bps: rp.rate_threshold_bps,
                handover_freq_hz: fh,
                d_th: cov.d_th,
                ell_th: cov.ell_th,
                platoon_length: length,
                v_max,
                stay_time: stay_time(&pc, &cov)?,
                isld_max: max_isld(&pc, &rp)?,
            });
        }
    }
    Ok(rows)
}

/// CSV export: `fc,Rth,f_handover,d_th,ell_th,D_platoon,v_max,T_stay,isld_max`.
pub fn write_planner_csv<W: Write>(rows: &[PlannerRow], out: &mut W) -> Result<()> {
    writeln!(out, "fc,Rth,f_handover,d_th,ell_th,D_platoon,v_max,T_stay,isld_max")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.carrier_freq_hz,
            r.rate_threshold_bps,
            r.handover_freq_hz,
            r.d_th,
            r.ell_th,
            r.platoon_length,
            r.v_max,
            r.stay_time,
            r.isld_max
        )?;
    }
    Ok(())
}

/// The reference parameter set used throughout the planner tables:
/// N = 64, M = 9, P = 20 dBm, B = 5 MHz, alpha = 2, r_o = 10 m, h_o = 6 m,
/// thermal noise, R_th = 75 Mbps, f_handover = 1/30.
pub fn table_reference_params(carrier_freq_hz: f64) -> RadioParams {
    RadioParams {
        n_antennas: 64,
        m_followers: 9,
        tx_power_leader_dbm: 20.0,
        bandwidth_hz: 5.0e6,
        carrier_freq_hz,
        path_loss_exp: 2.0,
        perp_distance_m: 10.0,
        elev_diff_m: 6.0,
        noise_power: crate::types::NoisePower::Auto,
        noise_figure_db: 0.0,
        rate_threshold_bps: 75.0e6,
        handover_freq_hz: 1.0 / 30.0,
    }
}
