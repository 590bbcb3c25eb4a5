//! Fixed-step integrator for the closed-loop platoon delay differential
//! equations. The delay is constrained to an integer number of steps so every
//! delayed-state lookup lands exactly on a stored grid point; no interpolation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ControlGains, DisturbanceProfile, PlatoonConfig, Trajectory};

pub const DEFAULT_DT: f64 = 0.005;
pub const MAX_DT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    /// Classic RK4; every stage reuses the delayed state sampled at the
    /// step's start time (tau >> dt, so the frozen delayed argument costs
    /// O(dt) inside an O(dt^4) scheme).
    #[default]
    Rk4,
    /// Explicit Euler, kept for hand-checkable single steps.
    Euler,
}

/// A fully specified simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub platoon: PlatoonConfig,
    pub gains: ControlGains,
    pub disturbance: DisturbanceProfile,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub method: IntegrationMethod,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl SimulationScenario {
    pub fn validate(&self) -> Result<()> {
        self.platoon.validate()?;
        self.gains.validate()?;
        self.disturbance.validate()?;
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::StepOutOfRange { dt: self.dt, max: MAX_DT });
        }
        self.delay_steps()?;
        if let Some(window) = self.disturbance.window() {
            if self.t_end <= window[1] {
                return Err(Error::HorizonTooShort { t_end: self.t_end, window_end: window[1] });
            }
        }
        if self.t_end <= 0.0 {
            return Err(Error::NonPositive { name: "t_end", value: self.t_end });
        }
        Ok(())
    }

    /// tau / dt, which must be a positive integer.
    pub fn delay_steps(&self) -> Result<usize> {
        let ratio = self.platoon.delay / self.dt;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 {
            return Err(Error::DelayGridMismatch { tau: self.platoon.delay, dt: self.dt });
        }
        Ok(k as usize)
    }
}

/// Spacing error of Eq-2 form: `x_i - x_prev + h v_o + l`.
pub fn spacing_error(x_i: f64, x_prev: f64, h: f64, v_o: f64, l: f64) -> f64 {
    x_i - x_prev + h * v_o + l
}

/// Leader acceleration at time `t` under the given profile.
pub fn leader_acceleration(profile: &DisturbanceProfile, t: f64) -> f64 {
    match profile {
        DisturbanceProfile::None => 0.0,
        DisturbanceProfile::Sinusoid { window } => {
            let [t0, t1] = *window;
            if t < t0 || t > t1 {
                return 0.0;
            }
            let span = t1 - t0;
            // Integer cycle count nearest to the nominal 1 rad/s frequency;
            // guarantees zero net impulse over the window.
            let cycles = (span / std::f64::consts::TAU).round().max(1.0);
            let omega = std::f64::consts::TAU * cycles / span;
            -(omega * (t - t0)).sin()
        }
        DisturbanceProfile::Piecewise { segments } => {
            for (idx, s) in segments.iter().enumerate() {
                let in_left = if idx == 0 { t >= s.from } else { t > s.from };
                if in_left && t <= s.to {
                    return s.acceleration;
                }
            }
            0.0
        }
    }
}

/// Stored per-vehicle state history plus the synthetic steady pre-history
/// for t < 0 (platoon at speed v_o, zero spacing error).
pub struct HistoryBuffer {
    dt: f64,
    v_o: f64,
    /// x_i(0) = -i (h v_o + l), leader at the origin.
    initial_x: Vec<f64>,
    /// `states[step][vehicle] = (x, v)` for step >= 0.
    states: Vec<Vec<(f64, f64)>>,
}

impl HistoryBuffer {
    pub fn new(platoon: &PlatoonConfig, dt: f64) -> Self {
        let gap = platoon.desired_gap();
        let n = platoon.m_followers + 1;
        let initial_x = (0..n).map(|i| -(i as f64) * gap).collect();
        Self { dt, v_o: platoon.target_velocity, initial_x, states: Vec::new() }
    }

    pub fn push(&mut self, state: Vec<(f64, f64)>) {
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State of vehicle `i` at grid step `step` (negative steps resolve to
    /// the analytic pre-history).
    pub fn state_at(&self, step: isize, vehicle: usize) -> Result<(f64, f64)> {
        if step >= 0 {
            let step = step as usize;
            let row = self
                .states
                .get(step)
                .ok_or(Error::HistoryUnderflow { t: step as f64 * self.dt })?;
            Ok(row[vehicle])
        } else {
            let t = step as f64 * self.dt;
            Ok((self.initial_x[vehicle] + self.v_o * t, self.v_o))
        }
    }
}

/// Control input of follower `i` at grid step `step`, evaluated from the
/// delayed state `step - tau/dt`:
///
/// `u_i = -K_x (x_i - x_{i-1} + h v_i + l) - K_v (v_i - v_{i-1})
///        - K_vo (v_i - v_o) - K_xo (x_i - x_0 + i h v_o + i l)`
///
/// with every state on the right taken at `t - tau`. Note the K_x bracket
/// uses the follower's own delayed velocity, not v_o.
pub fn control_input(
    history: &HistoryBuffer,
    i: usize,
    step: usize,
    scenario: &SimulationScenario,
) -> Result<f64> {
    let delay_steps = scenario.delay_steps()? as isize;
    let delayed = step as isize - delay_steps;
    let p = &scenario.platoon;
    let g = &scenario.gains;
    let (x_i, v_i) = history.state_at(delayed, i)?;
    let (x_prev, v_prev) = history.state_at(delayed, i - 1)?;
    let (x_leader, _) = history.state_at(delayed, 0)?;
    let i_f = i as f64;
    Ok(-(g.k_x * (x_i - x_prev + p.headway * v_i + p.standstill)
        + g.k_v * (v_i - v_prev)
        + g.k_vo * (v_i - p.target_velocity)
        + g.k_xo * (x_i - x_leader + i_f * p.headway * p.target_velocity + i_f * p.standstill)))
}

/// Integrate the closed loop and emit the full trajectory.
///
/// The leader integrates the disturbance profile only; followers integrate
/// the delayed control law. Deterministic for a given scenario. A non-finite
/// state truncates the run at the last finite sample instead of erroring, so
/// string-unstable gain sets still produce usable partial trajectories.
pub fn simulate(scenario: &SimulationScenario) -> Result<Trajectory> {
    scenario.validate()?;
    let p = &scenario.platoon;
    let m = p.m_followers;
    let n_vehicles = m + 1;
    let n_steps = (scenario.t_end / scenario.dt).round() as usize;
    let dt = scenario.dt;

    let mut history = HistoryBuffer::new(p, dt);
    let initial: Vec<(f64, f64)> =
        (0..n_vehicles).map(|i| (history.initial_x[i], p.target_velocity)).collect();
    history.push(initial);

    let mut truncated = false;
    for step in 0..n_steps {
        let t = step as f64 * dt;
        // Delayed arguments frozen over the step.
        let mut u = vec![0.0; n_vehicles];
        for i in 1..n_vehicles {
            u[i] = control_input(&history, i, step, scenario)?;
        }
        let current = &history.states[step];
        let next = match scenario.method {
            IntegrationMethod::Euler => {
                let mut next = Vec::with_capacity(n_vehicles);
                for (i, &(x, v)) in current.iter().enumerate() {
                    let a = if i == 0 { leader_acceleration(&scenario.disturbance, t) } else { u[i] };
                    next.push((x + dt * v, v + dt * a));
                }
                next
            }
            IntegrationMethod::Rk4 => {
                let mut next = Vec::with_capacity(n_vehicles);
                for (i, &(x, v)) in current.iter().enumerate() {
                    let accel = |tt: f64| {
                        if i == 0 {
                            leader_acceleration(&scenario.disturbance, tt)
                        } else {
                            u[i]
                        }
                    };
                    // k-stages of (x' = v, v' = a(t)).
                    let (k1x, k1v) = (v, accel(t));
                    let (k2x, k2v) = (v + 0.5 * dt * k1v, accel(t + 0.5 * dt));
                    let (k3x, k3v) = (v + 0.5 * dt * k2v, accel(t + 0.5 * dt));
                    let (k4x, k4v) = (v + dt * k3v, accel(t + dt));
                    next.push((
                        x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
                        v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
                    ));
                }
                next
            }
        };
        if next.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            truncated = true;
            break;
        }
        history.push(next);
    }

    let n_samples = history.len();
    let gap = p.desired_gap();
    let times: Vec<f64> = (0..n_samples).map(|s| s as f64 * dt).collect();
    let mut x = vec![Vec::with_capacity(n_samples); n_vehicles];
    let mut v = vec![Vec::with_capacity(n_samples); n_vehicles];
    for row in &history.states {
        for (i, &(xi, vi)) in row.iter().enumerate() {
            x[i].push(xi);
            v[i].push(vi);
        }
    }
    let mut e = vec![Vec::with_capacity(n_samples); m];
    for i in 1..n_vehicles {
        for s in 0..n_samples {
            e[i - 1].push(x[i][s] - x[i - 1][s] + gap);
        }
    }
    // Control inputs as applied at each stored sample.
    let mut u = vec![Vec::with_capacity(n_samples); m];
    for step in 0..n_samples {
        for i in 1..n_vehicles {
            u[i - 1].push(control_input(&history, i, step, scenario)?);
        }
    }

    Ok(Trajectory { dt, times, x, v, u, e, truncated })
}

/// Per-follower `max_t |e_i(t)|`.
pub fn peak_spacing_errors(traj: &Trajectory) -> Vec<f64> {
    traj.e
        .iter()
        .map(|series| series.iter().fold(0.0f64, |acc, &v| acc.max(v.abs())))
        .collect()
}

/// Earliest time after which every follower's |e_i| stays below `tol`;
/// `None` if the trajectory never settles within its horizon.
pub fn settling_time(traj: &Trajectory, tol: f64) -> Option<f64> {
    assert!(tol > 0.0, "settling tolerance must be positive");
    let n = traj.n_samples();
    let mut last_bad: Option<usize> = None;
    for s in (0..n).rev() {
        if traj.e.iter().any(|series| series[s].abs() >= tol) {
            last_bad = Some(s);
            break;
        }
    }
    match last_bad {
        None => Some(traj.times[0]),
        Some(s) if s + 1 < n => Some(traj.times[s + 1]),
        Some(_) => None,
    }
}

/// Write the trajectory as CSV: `t,x_0..x_M,v_0..v_M,u_1..u_M,e_1..e_M`,
/// one row per grid point, shortest-roundtrip double precision.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: &mut W) -> Result<()> {
    let m = traj.n_followers();
    write!(out, "t")?;
    for i in 0..=m {
        write!(out, ",x_{i}")?;
    }
    for i in 0..=m {
        write!(out, ",v_{i}")?;
    }
    for i in 1..=m {
        write!(out, ",u_{i}")?;
    }
    for i in 1..=m {
        write!(out, ",e_{i}")?;
    }
    writeln!(out)?;
    for s in 0..traj.n_samples() {
        write!(out, "{}", traj.times[s])?;
        for series in &traj.x {
            write!(out, ",{}", series[s])?;
        }
        for series in &traj.v {
            write!(out, ",{}", series[s])?;
        }
        for series in &traj.u {
            write!(out, ",{}", series[s])?;
        }
        for series in &traj.e {
            write!(out, ",{}", series[s])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Segment;
    use approx::assert_relative_eq;

    fn gains_row_c() -> ControlGains {
        ControlGains::new(0.75, 0.75, 0.249, 0.228).unwrap()
    }

    fn platoon(m: usize, tau: f64) -> PlatoonConfig {
        PlatoonConfig {
            m_followers: m,
            headway: 0.2,
            standstill: 2.0,
            target_velocity: 20.0,
            delay: tau,
        }
    }

    pub(crate) fn sinusoid() -> DisturbanceProfile {
        DisturbanceProfile::Sinusoid { window: [10.0, 30.0] }
    }

    fn step_profile() -> DisturbanceProfile {
        DisturbanceProfile::Piecewise {
            segments: vec![
                Segment { from: 10.0, to: 13.0, acceleration: 1.0 },
                Segment { from: 13.0, to: 17.0, acceleration: 0.0 },
                Segment { from: 17.0, to: 20.0, acceleration: -1.0 },
            ],
        }
    }

    #[test]
    fn spacing_error_reference_points() {
        assert_relative_eq!(
            spacing_error(-(0.2 * 20.0 + 1.667), 0.0, 0.2, 20.0, 1.667),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(spacing_error(-4.0, 0.0, 0.2, 20.0, 1.667), 1.667, epsilon = 1e-12);
        // Co-located vehicles show the full desired gap as error.
        assert_relative_eq!(spacing_error(100.0, 100.0, 0.2, 20.0, 1.667), 4.0 + 1.667);
    }

    #[test]
    fn leader_acceleration_windows() {
        let s = sinusoid();
        assert_eq!(leader_acceleration(&s, 9.99), 0.0);
        assert_eq!(leader_acceleration(&s, 30.01), 0.0);
        // Three full cycles over [10, 30]: zero net impulse.
        let dt = 1e-4;
        let impulse: f64 =
            (0..200_000).map(|k| leader_acceleration(&s, 10.0 + k as f64 * dt) * dt).sum();
        assert!(impulse.abs() < 1e-3, "net impulse {impulse}");

        let p = step_profile();
        assert_eq!(leader_acceleration(&p, 12.0), 1.0);
        assert_eq!(leader_acceleration(&p, 15.0), 0.0);
        assert_eq!(leader_acceleration(&p, 18.0), -1.0);
        assert_eq!(leader_acceleration(&p, 9.0), 0.0);
        assert_eq!(leader_acceleration(&p, 21.0), 0.0);

        let ramp = DisturbanceProfile::Piecewise {
            segments: vec![
                Segment { from: 10.0, to: 15.0, acceleration: 1.0 },
                Segment { from: 15.0, to: 20.0, acceleration: -1.0 },
            ],
        };
        assert_eq!(leader_acceleration(&ramp, 12.0), 1.0);
        assert_eq!(leader_acceleration(&ramp, 18.0), -1.0);
    }

    #[test]
    fn steady_platoon_has_zero_input() {
        let scenario = SimulationScenario {
            platoon: platoon(3, 0.3),
            gains: gains_row_c(),
            disturbance: DisturbanceProfile::None,
            t_end: 5.0,
            dt: 0.005,
            method: IntegrationMethod::Rk4,
        };
        let mut history = HistoryBuffer::new(&scenario.platoon, scenario.dt);
        let init: Vec<(f64, f64)> =
            (0..4).map(|i| (history.initial_x[i], 20.0)).collect();
        history.push(init);
        for i in 1..=3 {
            // Exact zero up to the rounding of h*v_o in the two position
            // brackets, which are evaluated in different association orders.
            assert!(control_input(&history, i, 0, &scenario).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn control_input_unit_offsets() {
        // Leader 1 m ahead of the desired gap, all velocities at v_o:
        // only the two position brackets contribute, each equal to -1.
        let scenario = SimulationScenario {
            platoon: platoon(2, 0.3),
            gains: gains_row_c(),
            disturbance: DisturbanceProfile::None,
            t_end: 5.0,
            dt: 0.005,
            method: IntegrationMethod::Rk4,
        };
        let gap = scenario.platoon.desired_gap();
        let mut history = HistoryBuffer::new(&scenario.platoon, scenario.dt);
        history.push(vec![(1.0, 20.0), (-gap, 20.0), (-2.0 * gap, 20.0)]);
        // Fill enough steps that step 60 looks back to stored step 0.
        for _ in 0..60 {
            let last = history.states.last().unwrap().clone();
            history.push(last);
        }
        let g = gains_row_c();
        let u1 = control_input(&history, 1, 60, &scenario).unwrap();
        assert_relative_eq!(u1, g.k_x + g.k_xo, max_relative = 1e-12);

        // Follower 1 moving 1 m/s fast at desired gaps: u_1 = -eta.
        let mut history = HistoryBuffer::new(&scenario.platoon, scenario.dt);
        history.push(vec![(0.0, 20.0), (-gap, 21.0), (-2.0 * gap, 20.0)]);
        for _ in 0..60 {
            let last = history.states.last().unwrap().clone();
            history.push(last);
        }
        let eta = g.k_x * scenario.platoon.headway + g.k_v + g.k_vo;
        let u1 = control_input(&history, 1, 60, &scenario).unwrap();
        assert_relative_eq!(u1, -eta, max_relative = 1e-12);
    }

    #[test]
    fn equilibrium_is_invariant() {
        let scenario = SimulationScenario {
            platoon: platoon(4, 0.3),
            gains: gains_row_c(),
            disturbance: DisturbanceProfile::None,
            t_end: 100.0,
            dt: 0.005,
            method: IntegrationMethod::Rk4,
        };
        let traj = simulate(&scenario).unwrap();
        let peak = peak_spacing_errors(&traj).into_iter().fold(0.0f64, f64::max);
        assert!(peak <= 1e-9, "equilibrium drift {peak}");
        assert_eq!(settling_time(&traj, 1e-6), Some(0.0));
    }

    #[test]
    fn single_euler_step_hand_check() {
        let scenario = SimulationScenario {
            platoon: platoon(1, 0.2),
            gains: gains_row_c(),
            disturbance: step_profile(),
            t_end: 30.0,
            dt: 0.05,
            method: IntegrationMethod::Euler,
        };
        let traj = simulate(&scenario).unwrap();
        // Disturbance starts at t = 10; the first step is pure drift.
        assert_relative_eq!(traj.v[0][1], 20.0);
        assert_relative_eq!(traj.v[1][1], 20.0);
        assert_relative_eq!(traj.u[0][0], 0.0);
        let gap = scenario.platoon.desired_gap();
        assert_relative_eq!(traj.x[0][1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(traj.x[1][1], 1.0 - gap, max_relative = 1e-12);
    }

    #[test]
    fn delay_grid_enforced() {
        let mut scenario = SimulationScenario {
            platoon: platoon(2, 0.3),
            gains: gains_row_c(),
            disturbance: DisturbanceProfile::None,
            t_end: 10.0,
            dt: 0.007,
            method: IntegrationMethod::Rk4,
        };
        assert!(matches!(scenario.validate(), Err(Error::DelayGridMismatch { .. })));
        scenario.dt = 0.01;
        assert!(scenario.validate().is_ok());
        assert_eq!(scenario.delay_steps().unwrap(), 30);
    }

    #[test]
    fn trajectory_self_consistency() {
        let scenario = SimulationScenario {
            platoon: platoon(3, 0.3),
            gains: gains_row_c(),
            disturbance: sinusoid(),
            t_end: 40.0,
            dt: 0.01,
            method: IntegrationMethod::Rk4,
        };
        let traj = simulate(&scenario).unwrap();
        let gap = scenario.platoon.desired_gap();
        for i in 1..=3usize {
            for s in 0..traj.n_samples() {
                let recomputed = traj.x[i][s] - traj.x[i - 1][s] + gap;
                assert_eq!(recomputed, traj.e[i - 1][s]);
            }
        }
    }

    #[test]
    fn refinement_convergence_rk4() {
        // Halving dt should barely move the peak error for a smooth run.
        let base = SimulationScenario {
            platoon: platoon(2, 0.1),
            gains: ControlGains::new(0.75, 0.75, 0.273, 0.281).unwrap(),
            disturbance: sinusoid(),
            t_end: 50.0,
            dt: 0.01,
            method: IntegrationMethod::Rk4,
        };
        // The frozen delayed argument makes the scheme first order in the
        // delay channel, so expect O(dt) movement, not O(dt^4).
        let coarse = peak_spacing_errors(&simulate(&base).unwrap());
        let mut fine_s = base.clone();
        fine_s.dt = 0.005;
        let fine = peak_spacing_errors(&simulate(&fine_s).unwrap());
        for (c, f) in coarse.iter().zip(&fine) {
            assert!((c - f).abs() < 1e-3, "dt refinement moved peak {c} -> {f}");
        }
    }

    #[test]
    fn determinism_and_pre_disturbance_equilibrium() {
        let s = SimulationScenario {
            platoon: platoon(3, 0.3),
            gains: gains_row_c(),
            disturbance: sinusoid(),
            t_end: 50.0,
            dt: 0.005,
            method: IntegrationMethod::Rk4,
        };
        let t1 = simulate(&s).unwrap();
        let t2 = simulate(&s).unwrap();
        assert_eq!(t1, t2);
        // Before the disturbance reaches the followers the platoon stays at
        // the moving equilibrium (to rounding of the mixed-order gap terms).
        let idx_10s = (10.0 / 0.005) as usize;
        for series in &t1.e {
            for &e in &series[..idx_10s] {
                assert!(e.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unstable_gains_truncate_not_error() {
        // Far outside the plant region: eta beyond the corner point.
        let scenario = SimulationScenario {
            platoon: PlatoonConfig { delay: 0.5, ..platoon(4, 0.5) },
            gains: ControlGains::new(20.0, 20.0, 50.0, 50.0).unwrap(),
            disturbance: sinusoid(),
            t_end: 400.0,
            dt: 0.005,
            method: IntegrationMethod::Rk4,
        };
        let traj = simulate(&scenario).unwrap();
        assert!(traj.truncated, "expected divergence for gains far outside the region");
        assert!(traj.n_samples() > 0);
        assert!(traj.x.iter().all(|s| s.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn csv_header_shape() {
        let scenario = SimulationScenario {
            platoon: platoon(2, 0.3),
            gains: gains_row_c(),
            disturbance: DisturbanceProfile::None,
            t_end: 1.0,
            dt: 0.01,
            method: IntegrationMethod::Rk4,
        };
        let traj = simulate(&scenario).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "t,x_0,x_1,x_2,v_0,v_1,v_2,u_1,u_2,e_1,e_2");
        assert_eq!(text.lines().count(), 1 + traj.n_samples());
    }
}
