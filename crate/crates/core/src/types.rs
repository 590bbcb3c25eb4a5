//! Shared domain types. All internal physics is in SI units (m, s, W, Hz);
//! dBm is accepted only at configuration boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(Error::NonPositive { name, value });
    }
    Ok(())
}

fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    Ok(())
}

/// The four feedback gains of the RSU control law.
///
/// `k_x` (1/s^2) and `k_v` (1/s) act on predecessor-relative state,
/// `k_xo` (1/s^2) and `k_vo` (1/s) on leader/target-relative state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    pub k_x: f64,
    pub k_v: f64,
    pub k_vo: f64,
    pub k_xo: f64,
}

impl ControlGains {
    pub fn new(k_v: f64, k_vo: f64, k_x: f64, k_xo: f64) -> Result<Self> {
        require_positive("k_v", k_v)?;
        require_positive("k_vo", k_vo)?;
        require_positive("k_x", k_x)?;
        require_positive("k_xo", k_xo)?;
        Ok(Self { k_x, k_v, k_vo, k_xo })
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("k_v", self.k_v)?;
        require_positive("k_vo", self.k_vo)?;
        require_positive("k_x", self.k_x)?;
        require_positive("k_xo", self.k_xo)
    }
}

/// Reduced gain pair: `lambda = k_x + k_xo` (1/s^2),
/// `eta = k_x h + k_v + k_vo` (1/s). Every stability test works in this plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaEta {
    pub lambda: f64,
    pub eta: f64,
}

impl LambdaEta {
    pub fn new(lambda: f64, eta: f64) -> Result<Self> {
        require_positive("lambda", lambda)?;
        require_positive("eta", eta)?;
        Ok(Self { lambda, eta })
    }
}

/// Derive the reduced pair from gains and time headway.
pub fn derive_lambda_eta(gains: &ControlGains, headway: f64) -> Result<LambdaEta> {
    gains.validate()?;
    require_positive("headway", headway)?;
    Ok(LambdaEta {
        lambda: gains.k_x + gains.k_xo,
        eta: gains.k_x * headway + gains.k_v + gains.k_vo,
    })
}

/// Platoon geometry and timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatoonConfig {
    /// Number of follower vehicles M (vehicle 0 is the leader).
    pub m_followers: usize,
    /// Time headway h in seconds.
    pub headway: f64,
    /// Standstill distance l in meters (may be zero).
    pub standstill: f64,
    /// Target platoon velocity v_o in m/s.
    pub target_velocity: f64,
    /// Total communication + processing delay tau in seconds.
    pub delay: f64,
}

impl PlatoonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_followers == 0 {
            return Err(Error::NonPositive { name: "m_followers", value: 0.0 });
        }
        require_positive("headway", self.headway)?;
        require_finite("standstill", self.standstill)?;
        if self.standstill < 0.0 {
            return Err(Error::NonPositive { name: "standstill", value: self.standstill });
        }
        require_positive("target_velocity", self.target_velocity)?;
        require_positive("delay", self.delay)?;
        require_positive("desired gap h*v_o + l", self.desired_gap())?;
        Ok(())
    }

    /// Desired inter-vehicle gap `h*v_o + l` in meters.
    pub fn desired_gap(&self) -> f64 {
        self.headway * self.target_velocity + self.standstill
    }
}

/// Leader acceleration profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceProfile {
    /// Leader holds the target velocity throughout.
    None,
    /// Sinusoidal acceleration of unit amplitude inside `[t_start, t_end]`,
    /// zero outside. The frequency is snapped to an integer number of cycles
    /// over the window (nearest to the nominal 1 rad/s) so the disturbance
    /// carries zero net impulse and the leader returns to the target velocity.
    Sinusoid { window: [f64; 2] },
    /// Piecewise-constant acceleration over contiguous segments tiling the
    /// window; zero outside.
    Piecewise { segments: Vec<Segment> },
}

/// One constant-acceleration interval `(from, to]` of a piecewise profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub acceleration: f64,
}

impl DisturbanceProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            DisturbanceProfile::None => Ok(()),
            DisturbanceProfile::Sinusoid { window } => {
                require_finite("window start", window[0])?;
                require_finite("window end", window[1])?;
                if window[1] <= window[0] {
                    return Err(Error::BadSegments(format!(
                        "window end {} not after start {}",
                        window[1], window[0]
                    )));
                }
                Ok(())
            }
            DisturbanceProfile::Piecewise { segments } => {
                if segments.is_empty() {
                    return Err(Error::BadSegments("no segments".into()));
                }
                for s in segments {
                    require_finite("segment acceleration", s.acceleration)?;
                    if s.to <= s.from {
                        return Err(Error::BadSegments(format!(
                            "segment ({}, {}] is empty",
                            s.from, s.to
                        )));
                    }
                }
                for pair in segments.windows(2) {
                    if (pair[1].from - pair[0].to).abs() > 1e-12 {
                        return Err(Error::BadSegments(format!(
                            "gap or overlap between {} and {}",
                            pair[0].to, pair[1].from
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// `[t_start, t_end]` of the active window; `None` for the quiet profile.
    pub fn window(&self) -> Option<[f64; 2]> {
        match self {
            DisturbanceProfile::None => None,
            DisturbanceProfile::Sinusoid { window } => Some(*window),
            DisturbanceProfile::Piecewise { segments } => {
                Some([segments[0].from, segments[segments.len() - 1].to])
            }
        }
    }
}

/// Time-indexed state of every vehicle on one shared grid.
///
/// Vehicle 0 is the leader; control inputs `u` and spacing errors `e` exist
/// for followers 1..=M only and are indexed `[follower-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    /// `x[vehicle][sample]` position in meters.
    pub x: Vec<Vec<f64>>,
    /// `v[vehicle][sample]` velocity in m/s.
    pub v: Vec<Vec<f64>>,
    /// `u[follower-1][sample]` control input in m/s^2.
    pub u: Vec<Vec<f64>>,
    /// `e[follower-1][sample]` spacing error in meters.
    pub e: Vec<Vec<f64>>,
    /// True when integration hit a non-finite state and the series were cut
    /// at the last finite sample.
    pub truncated: bool,
}

impl Trajectory {
    pub fn n_followers(&self) -> usize {
        self.e.len()
    }

    pub fn n_samples(&self) -> usize {
        self.times.len()
    }
}

/// How the RSU noise power is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoisePower {
    /// Thermal floor -174 + 10 log10(B) dBm.
    #[serde(with = "auto_tag")]
    Auto,
    /// Explicit noise power in dBm.
    Dbm(f64),
}

mod auto_tag {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<(), D::Error> {
        let tag = String::deserialize(d)?;
        if tag == "auto" {
            Ok(())
        } else {
            Err(de::Error::custom(format!("expected \"auto\", got \"{tag}\"")))
        }
    }
}

/// Link-budget inputs for the massive-MIMO V2I uplink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// RSU antenna count N; must exceed M + 1 for ZF detection.
    pub n_antennas: usize,
    /// Follower count M (M + 1 single-antenna vehicles in total).
    pub m_followers: usize,
    /// Leader transmit power in dBm.
    pub tx_power_leader_dbm: f64,
    /// System bandwidth B in Hz.
    pub bandwidth_hz: f64,
    /// Carrier frequency f_c in Hz.
    pub carrier_freq_hz: f64,
    /// Path-loss exponent alpha (may be non-integer).
    pub path_loss_exp: f64,
    /// Perpendicular lane-to-RSU distance r_o in meters.
    pub perp_distance_m: f64,
    /// Antenna elevation difference h_o in meters.
    pub elev_diff_m: f64,
    /// Noise power, explicit dBm or thermal auto.
    pub noise_power: NoisePower,
    /// Extra link-budget loss in dB applied on top of the noise power
    /// (noise figure / margin); zero by default.
    #[serde(default)]
    pub noise_figure_db: f64,
    /// Minimum required rate R_th in bps.
    pub rate_threshold_bps: f64,
    /// Maximum allowable handover frequency in 1/s.
    pub handover_freq_hz: f64,
}

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas <= self.m_followers + 1 {
            return Err(Error::InsufficientAntennas {
                n: self.n_antennas,
                m_plus_one: self.m_followers + 1,
            });
        }
        require_finite("tx_power_leader_dbm", self.tx_power_leader_dbm)?;
        require_positive("bandwidth_hz", self.bandwidth_hz)?;
        require_positive("carrier_freq_hz", self.carrier_freq_hz)?;
        require_positive("path_loss_exp", self.path_loss_exp)?;
        require_finite("perp_distance_m", self.perp_distance_m)?;
        require_finite("elev_diff_m", self.elev_diff_m)?;
        if self.perp_distance_m < 0.0 {
            return Err(Error::NonPositive { name: "perp_distance_m", value: self.perp_distance_m });
        }
        if self.elev_diff_m < 0.0 {
            return Err(Error::NonPositive { name: "elev_diff_m", value: self.elev_diff_m });
        }
        require_finite("noise_figure_db", self.noise_figure_db)?;
        require_positive("rate_threshold_bps", self.rate_threshold_bps)?;
        require_positive("handover_freq_hz", self.handover_freq_hz)?;
        if let NoisePower::Dbm(p) = self.noise_power {
            require_finite("noise_power", p)?;
        }
        Ok(())
    }

    /// Array gain constant `beta = (c / (4 pi f_c))^2`; derived, never stored.
    pub fn beta(&self) -> f64 {
        let wavelength_factor = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * self.carrier_freq_hz);
        wavelength_factor * wavelength_factor
    }

    /// Noise power in watts, including the calibration offset.
    pub fn noise_watts(&self) -> f64 {
        let dbm = match self.noise_power {
            NoisePower::Auto => -174.0 + 10.0 * self.bandwidth_hz.log10(),
            NoisePower::Dbm(p) => p,
        };
        crate::units::dbm_to_watts(dbm + self.noise_figure_db)
    }

    /// Leader transmit power in watts.
    pub fn tx_power_watts(&self) -> f64 {
        crate::units::dbm_to_watts(self.tx_power_leader_dbm)
    }
}

/// Outcome of a stability test. `margin > 0` iff stable (boundary counts as
/// unstable); the witness is the quantity that decided the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Signed distance to the boundary in the tested coordinate.
    pub margin: f64,
    /// Deciding quantity: the critical lambda for the plant test, the first
    /// violating frequency for the string sweep.
    pub witness: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lambda_eta_table_rows() {
        // Gains as listed for the third delay level (tau = 0.3).
        let g = ControlGains::new(0.75, 0.75, 0.249, 0.228).unwrap();
        let le = derive_lambda_eta(&g, 0.2).unwrap();
        assert_relative_eq!(le.lambda, 0.477, max_relative = 1e-12);
        assert_relative_eq!(le.eta, 1.5498, max_relative = 1e-12);

        let g = ControlGains::new(0.1, 0.2, 0.5, 0.1).unwrap();
        let le = derive_lambda_eta(&g, 0.2).unwrap();
        assert_relative_eq!(le.lambda, 0.6, max_relative = 1e-12);
        assert_relative_eq!(le.eta, 0.4, max_relative = 1e-12);
    }

    #[test]
    fn lambda_eta_headway_limit() {
        let g = ControlGains::new(0.3, 0.4, 1.0, 1.0).unwrap();
        let le = derive_lambda_eta(&g, 1e-300).unwrap();
        assert_relative_eq!(le.eta, 0.7, max_relative = 1e-9);
    }

    #[test]
    fn lambda_eta_linearity_in_kxo() {
        let g = ControlGains::new(0.5, 0.5, 0.3, 0.2).unwrap();
        let base = derive_lambda_eta(&g, 0.4).unwrap();
        let doubled = ControlGains::new(0.5, 0.5, 0.3, 0.4).unwrap();
        let le = derive_lambda_eta(&doubled, 0.4).unwrap();
        assert_relative_eq!(le.lambda - base.lambda, 0.2, max_relative = 1e-12);
        assert_eq!(le.eta, base.eta);
    }

    #[test]
    fn zero_gain_rejected() {
        assert!(ControlGains::new(0.0, 0.5, 0.3, 0.2).is_err());
        assert!(ControlGains::new(0.5, 0.5, -0.1, 0.2).is_err());
        let g = ControlGains::new(0.5, 0.5, 0.3, 0.2).unwrap();
        assert!(derive_lambda_eta(&g, 0.0).is_err());
    }

    #[test]
    fn piecewise_segments_must_tile() {
        let bad = DisturbanceProfile::Piecewise {
            segments: vec![
                Segment { from: 10.0, to: 13.0, acceleration: 1.0 },
                Segment { from: 14.0, to: 20.0, acceleration: -1.0 },
            ],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn antenna_precondition() {
        let mut rp = crate::radio::table_reference_params(3.5e9);
        rp.n_antennas = rp.m_followers + 1;
        assert!(rp.validate().is_err());
    }

    #[test]
    fn noise_power_serde_forms() {
        let auto: NoisePower = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(auto, NoisePower::Auto);
        let fixed: NoisePower = serde_json::from_str("-107.0").unwrap();
        assert_eq!(fixed, NoisePower::Dbm(-107.0));
    }
}
