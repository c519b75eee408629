//! Ducted fan: blade-element thrust and torque with a uniform-inflow momentum
//! closure, the static duct thrust ratio, and the power-matching map from
//! engine brake power to lift.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Linear lift with a symmetric stall cap and constant profile drag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Polar {
    /// 1/rad
    pub lift_slope: f64,
    /// rad
    pub zero_lift_angle: f64,
    pub lift_cap: f64,
    pub profile_drag: f64,
}

impl Default for Polar {
    fn default() -> Self {
        Self {
            lift_slope: 2.0 * PI * 0.9,
            zero_lift_angle: 0.0,
            lift_cap: 1.2,
            profile_drag: 0.02,
        }
    }
}

impl Polar {
    /// (Cl, Cd) at angle of attack `alpha` (rad).
    pub fn coefficients(&self, alpha: f64) -> (f64, f64) {
        let cl = (self.lift_slope * (alpha - self.zero_lift_angle)).clamp(-self.lift_cap, self.lift_cap);
        (cl, self.profile_drag)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflowSolver {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub relaxation: f64,
}

impl Default for InflowSolver {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-8,
            relaxation: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FanGeometry {
    /// R (m)
    pub blade_radius: f64,
    /// r0 (m)
    pub root_cutout: f64,
    /// B, blade number corrective factor
    pub blade_factor: f64,
    /// Chord at root and tip, linear in between (m).
    pub chord_root: f64,
    pub chord_tip: f64,
    /// Geometric pitch at root and tip, linear in between (rad).
    pub twist_root: f64,
    pub twist_tip: f64,
    pub element_count: usize,
    /// S2 (m²)
    pub disc_area: f64,
    /// S3 (m²)
    pub outlet_area: f64,
    pub polar: Polar,
    /// Fan shaft speed per crankshaft speed.
    pub pulley_ratio: f64,
    pub transmission_efficiency: f64,
    /// ρ (kg/m³)
    pub air_density: f64,
    /// Upper end of the fan speed bracket used when inverting power (rev/s).
    pub max_fan_speed: f64,
    pub inflow: InflowSolver,
}

impl Default for FanGeometry {
    fn default() -> Self {
        let (r, r0) = (0.35, 0.07);
        let disc = PI * (r * r - r0 * r0);
        Self {
            blade_radius: r,
            root_cutout: r0,
            blade_factor: 4.0,
            chord_root: 0.06,
            chord_tip: 0.06,
            twist_root: 30f64.to_radians(),
            twist_tip: 10f64.to_radians(),
            element_count: 32,
            disc_area: disc,
            outlet_area: disc,
            polar: Polar::default(),
            pulley_ratio: 1.0,
            transmission_efficiency: 0.97,
            air_density: 1.225,
            max_fan_speed: 250.0,
            inflow: InflowSolver::default(),
        }
    }
}

impl FanGeometry {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("fan: {m}")));
        if !(self.root_cutout >= 0.0 && self.root_cutout < self.blade_radius) {
            return fail("root_cutout must satisfy 0 <= r0 < R");
        }
        if !(self.disc_area > 0.0 && self.outlet_area > 0.0) {
            return fail("disc and outlet areas must be positive");
        }
        if self.element_count < 16 {
            return fail("element_count must be at least 16");
        }
        if !(self.pulley_ratio > 0.0) {
            return fail("pulley_ratio must be positive");
        }
        if !(self.transmission_efficiency > 0.0 && self.transmission_efficiency <= 1.0) {
            return fail("transmission_efficiency must lie in (0, 1]");
        }
        if !(self.air_density > 0.0 && self.blade_factor > 0.0 && self.max_fan_speed > 0.0) {
            return fail("density, blade factor and speed bracket must be positive");
        }
        if !(self.chord_root > 0.0 && self.chord_tip > 0.0) {
            return fail("chord must be positive");
        }
        let s = &self.inflow;
        if s.max_iterations == 0 || !(s.tolerance > 0.0) || !(s.relaxation > 0.0 && s.relaxation <= 1.0) {
            return fail("inflow solver settings out of range");
        }
        Ok(())
    }

    fn span_fraction(&self, r: f64) -> f64 {
        (r - self.root_cutout) / (self.blade_radius - self.root_cutout)
    }

    pub fn chord(&self, r: f64) -> f64 {
        self.chord_root + (self.chord_tip - self.chord_root) * self.span_fraction(r)
    }

    pub fn twist(&self, r: f64) -> f64 {
        self.twist_root + (self.twist_tip - self.twist_root) * self.span_fraction(r)
    }
}

/// Loads of the bare fan at one speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FanOperatingPoint {
    /// n_fan (rev/s)
    pub fan_speed: f64,
    /// T_UDF (N)
    pub thrust_unducted: f64,
    /// Q_UDF (N·m)
    pub torque: f64,
    /// P_UDF (W)
    pub power: f64,
    /// T_DF (N)
    pub thrust_ducted: f64,
}

/// Element thrust and torque coefficients (T_c, Q_c), normalized so that
/// T = ½·ρ·V_trans²·B·Σ T_c·dr and Q = ½·ρ·V_trans²·B·Σ Q_c·dr, with V_trans
/// the blade-tip resultant of rotation and axial inflow.
pub fn blade_element_coeffs(r: f64, fan_speed: f64, induced_velocity: f64, geom: &FanGeometry) -> (f64, f64) {
    let omega = 2.0 * PI * fan_speed;
    let tangential = omega * r;
    let axial = induced_velocity;
    let tip = omega * geom.blade_radius;
    let v_trans_sq = tip * tip + axial * axial;
    if v_trans_sq == 0.0 {
        return (0.0, 0.0);
    }
    let local_sq = tangential * tangential + axial * axial;
    let phi = axial.atan2(tangential);
    let (cl, cd) = geom.polar.coefficients(geom.twist(r) - phi);
    let (s, c) = phi.sin_cos();
    let scale = local_sq / v_trans_sq * geom.chord(r);
    (scale * (cl * c - cd * s), scale * (cl * s + cd * c) * r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct RotorLoads {
    thrust: f64,
    torque: f64,
}

fn element_sum(fan_speed: f64, induced: f64, geom: &FanGeometry) -> RotorLoads {
    let dr = (geom.blade_radius - geom.root_cutout) / geom.element_count as f64;
    let (mut tc, mut qc) = (0.0, 0.0);
    for i in 0..geom.element_count {
        let r = geom.root_cutout + (i as f64 + 0.5) * dr;
        let (t, q) = blade_element_coeffs(r, fan_speed, induced, geom);
        tc += t * dr;
        qc += q * dr;
    }
    let tip = 2.0 * PI * fan_speed * geom.blade_radius;
    let head = 0.5 * geom.air_density * (tip * tip + induced * induced) * geom.blade_factor;
    RotorLoads {
        thrust: head * tc,
        torque: head * qc,
    }
}

/// Relaxed fixed point between the blade-element thrust and the momentum
/// relation T = 2·ρ·S2·v².
fn solve_rotor(fan_speed: f64, geom: &FanGeometry) -> Result<RotorLoads> {
    if fan_speed == 0.0 {
        return Ok(RotorLoads { thrust: 0.0, torque: 0.0 });
    }
    let s = &geom.inflow;
    let mut v = 0.05 * 2.0 * PI * fan_speed.abs() * geom.blade_radius;
    let mut residual = f64::INFINITY;
    for _ in 0..s.max_iterations {
        let loads = element_sum(fan_speed, v, geom);
        let target = (loads.thrust.max(0.0) / (2.0 * geom.air_density * geom.disc_area)).sqrt();
        let next = (1.0 - s.relaxation) * v + s.relaxation * target;
        residual = (next - v).abs();
        v = next;
        if residual < s.tolerance * v.max(1.0) {
            return Ok(element_sum(fan_speed, v, geom));
        }
    }
    Err(Error::InflowNonConvergence {
        iterations: s.max_iterations,
        residual,
    })
}

pub fn unducted_thrust(fan_speed: f64, geom: &FanGeometry) -> Result<f64> {
    Ok(solve_rotor(fan_speed, geom)?.thrust)
}

pub fn unducted_torque(fan_speed: f64, geom: &FanGeometry) -> Result<f64> {
    Ok(solve_rotor(fan_speed, geom)?.torque)
}

/// P = 2π·n·Q with n in rev/s.
pub fn fan_power(fan_speed: f64, torque: f64) -> f64 {
    2.0 * PI * fan_speed * torque
}

/// Static thrust ratio of the ducted over the bare fan, 1.26·(S3/S2)^(1/3).
pub fn duct_ratio(geom: &FanGeometry) -> f64 {
    1.26 * (geom.outlet_area / geom.disc_area).cbrt()
}

/// Fan loads as a function of fan speed. Implemented by the direct
/// blade-element solve and by its cached quadratic map.
pub trait FanModel {
    /// (T_UDF, Q_UDF) at fan speed `fan_speed` (rev/s).
    fn loads(&self, fan_speed: f64) -> Result<(f64, f64)>;
    fn duct_ratio(&self) -> f64;
    fn pulley_ratio(&self) -> f64;
    fn transmission_efficiency(&self) -> f64;
    fn max_fan_speed(&self) -> f64;

    fn operating_point(&self, fan_speed: f64) -> Result<FanOperatingPoint> {
        let (t, q) = self.loads(fan_speed)?;
        Ok(FanOperatingPoint {
            fan_speed,
            thrust_unducted: t,
            torque: q,
            power: fan_power(fan_speed, q),
            thrust_ducted: self.duct_ratio() * t,
        })
    }

    /// Power the crankshaft delivers into the transmission at crankshaft
    /// speed `speed` (rev/s), i.e. the fan's absorbed power over η_tr.
    fn load_power(&self, speed: f64) -> Result<f64> {
        let n_fan = speed.max(0.0) * self.pulley_ratio();
        let (_, q) = self.loads(n_fan)?;
        Ok(fan_power(n_fan, q) / self.transmission_efficiency())
    }

    /// Ducted thrust (N) at crankshaft speed `speed` (rev/s).
    fn ducted_thrust_at(&self, speed: f64) -> Result<f64> {
        let (t, _) = self.loads(speed.max(0.0) * self.pulley_ratio())?;
        Ok(self.duct_ratio() * t)
    }

    /// Solves P_UDF(n_fan) = P_b·η_tr by bisection; returns (T_DF, n_fan).
    fn thrust_from_power(&self, brake_power: f64) -> Result<(f64, f64)> {
        if !(brake_power > 0.0) {
            return Ok((0.0, 0.0));
        }
        let target = brake_power * self.transmission_efficiency();
        let power = |n: f64| -> Result<f64> { Ok(fan_power(n, self.loads(n)?.1)) };
        let (mut lo, mut hi) = (0.0, self.max_fan_speed());
        let limit = power(hi)?;
        if limit < target {
            return Err(Error::Bracket {
                power: brake_power,
                limit: limit / self.transmission_efficiency(),
            });
        }
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if power(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let n = 0.5 * (lo + hi);
        Ok((self.duct_ratio() * self.loads(n)?.0, n))
    }

    /// (∂T_DF/∂Q_eng, ∂T_DF/∂n) through brake power Q_eng·2π·n, by central
    /// differences with relative step `rel_step`.
    fn thrust_jacobian_with_step(&self, torque: f64, speed: f64, rel_step: f64) -> Result<(f64, f64)> {
        let t = |q: f64, n: f64| -> Result<f64> { Ok(self.thrust_from_power(q * 2.0 * PI * n)?.0) };
        let hq = rel_step * torque.abs().max(1.0);
        let hn = rel_step * speed.abs().max(1.0);
        let dq = (t(torque + hq, speed)? - t(torque - hq, speed)?) / (2.0 * hq);
        let dn = (t(torque, speed + hn)? - t(torque, speed - hn)?) / (2.0 * hn);
        Ok((dq, dn))
    }

    fn thrust_jacobian(&self, torque: f64, speed: f64) -> Result<(f64, f64)> {
        self.thrust_jacobian_with_step(torque, speed, 1e-4)
    }
}

impl FanModel for FanGeometry {
    fn loads(&self, fan_speed: f64) -> Result<(f64, f64)> {
        let l = solve_rotor(fan_speed, self)?;
        Ok((l.thrust, l.torque))
    }

    fn duct_ratio(&self) -> f64 {
        duct_ratio(self)
    }

    fn pulley_ratio(&self) -> f64 {
        self.pulley_ratio
    }

    fn transmission_efficiency(&self) -> f64 {
        self.transmission_efficiency
    }

    fn max_fan_speed(&self) -> f64 {
        self.max_fan_speed
    }
}

/// Power-matching map from engine brake power to ducted thrust.
pub fn thrust_from_power(brake_power: f64, geom: &FanGeometry) -> Result<(f64, f64)> {
    geom.thrust_from_power(brake_power)
}

/// Transmission input power at crankshaft speed `speed` (rev/s).
pub fn fan_load_power(speed: f64, geom: &FanGeometry) -> Result<f64> {
    geom.load_power(speed)
}

pub fn thrust_jacobian(torque: f64, speed: f64, geom: &FanGeometry) -> Result<(f64, f64)> {
    geom.thrust_jacobian(torque, speed)
}

/// Static fan loads scale exactly with n²: with zero forward speed every
/// velocity in the blade-element and momentum relations is proportional to
/// n, so T = k_T·n² and Q = k_Q·n². One solve fixes both coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FanMap {
    pub thrust_coeff: f64,
    pub torque_coeff: f64,
    pub duct_ratio: f64,
    pub pulley_ratio: f64,
    pub transmission_efficiency: f64,
    pub max_fan_speed: f64,
}

impl FanMap {
    pub fn from_geometry(geom: &FanGeometry) -> Result<Self> {
        geom.validate()?;
        let n_ref = 100.0;
        let (t, q) = geom.loads(n_ref)?;
        Ok(Self {
            thrust_coeff: t / (n_ref * n_ref),
            torque_coeff: q / (n_ref * n_ref),
            duct_ratio: duct_ratio(geom),
            pulley_ratio: geom.pulley_ratio,
            transmission_efficiency: geom.transmission_efficiency,
            max_fan_speed: geom.max_fan_speed,
        })
    }

    /// Crankshaft speed (rev/s) at which the ducted thrust equals `thrust` (N).
    pub fn speed_for_thrust(&self, thrust: f64) -> f64 {
        (thrust.max(0.0) / (self.duct_ratio * self.thrust_coeff)).sqrt() / self.pulley_ratio
    }
}

impl FanModel for FanMap {
    fn loads(&self, fan_speed: f64) -> Result<(f64, f64)> {
        let n2 = fan_speed * fan_speed;
        Ok((self.thrust_coeff * n2, self.torque_coeff * n2))
    }

    fn duct_ratio(&self) -> f64 {
        self.duct_ratio
    }

    fn pulley_ratio(&self) -> f64 {
        self.pulley_ratio
    }

    fn transmission_efficiency(&self) -> f64 {
        self.transmission_efficiency
    }

    fn max_fan_speed(&self) -> f64 {
        self.max_fan_speed
    }

    fn thrust_from_power(&self, brake_power: f64) -> Result<(f64, f64)> {
        if !(brake_power > 0.0) {
            return Ok((0.0, 0.0));
        }
        let target = brake_power * self.transmission_efficiency;
        let n = (target / (2.0 * PI * self.torque_coeff)).cbrt();
        if n > self.max_fan_speed {
            let limit = fan_power(self.max_fan_speed, self.loads(self.max_fan_speed)?.1);
            return Err(Error::Bracket {
                power: brake_power,
                limit: limit / self.transmission_efficiency,
            });
        }
        Ok((self.duct_ratio * self.thrust_coeff * n * n, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geom() -> FanGeometry {
        FanGeometry::default()
    }

    #[test]
    fn still_air_gives_zero_coefficients() {
        let g = geom();
        assert_eq!(blade_element_coeffs(0.2, 0.0, 0.0, &g), (0.0, 0.0));
    }

    #[test]
    fn zero_lift_angle_leaves_only_drag() {
        // Choose the inflow so that φ equals the local pitch.
        let g = geom();
        let (r, n) = (0.21, 50.0);
        let ut = 2.0 * PI * n * r;
        let v = ut * g.twist(r).tan();
        let (cl, _) = g.polar.coefficients(g.twist(r) - v.atan2(ut));
        assert!(cl.abs() < 1e-12);
        let (tc, qc) = blade_element_coeffs(r, n, v, &g);
        let phi = v.atan2(ut);
        let scale = (ut * ut + v * v) / ((2.0 * PI * n * g.blade_radius).powi(2) + v * v) * g.chord(r);
        assert_relative_eq!(tc, -scale * 0.02 * phi.sin(), max_relative = 1e-9);
        assert!(qc > 0.0);
    }

    #[test]
    fn mid_span_element_hand_value() {
        // r = 0.21 m, n = 100 rev/s, v = 10 m/s:
        //   Ωr = 131.9469 m/s, φ = atan(10/131.9469) = 0.0756434 rad
        //   θ  = 20° = 0.3490659 rad, α = 0.2734225 rad
        //   Cl = 5.6548668·0.2734225 = 1.5461739 → capped at 1.2
        //   V² = 17509.98, V_trans² = (219.9115)²+100 = 48461.06
        //   T_c = 0.3613206·0.06·(1.2·0.997140 − 0.02·0.075571) = 0.0259079
        //   Q_c = 0.3613206·0.06·(1.2·0.075571 + 0.02·0.997140)·0.21 = 5.03651e-4
        let g = geom();
        let (tc, qc) = blade_element_coeffs(0.21, 100.0, 10.0, &g);
        let ut = 2.0 * PI * 100.0 * 0.21;
        let phi = (10.0f64).atan2(ut);
        let ratio = (ut * ut + 100.0) / ((2.0 * PI * 100.0 * 0.35f64).powi(2) + 100.0);
        assert_relative_eq!(tc, ratio * 0.06 * (1.2 * phi.cos() - 0.02 * phi.sin()), max_relative = 1e-12);
        assert_relative_eq!(qc, ratio * 0.06 * (1.2 * phi.sin() + 0.02 * phi.cos()) * 0.21, max_relative = 1e-12);
        assert_relative_eq!(tc, 0.0259079, max_relative = 1e-5);
        assert_relative_eq!(qc, 5.03651e-4, max_relative = 1e-5);
    }

    #[test]
    fn zero_speed_gives_zero_loads() {
        let g = geom();
        assert_eq!(unducted_thrust(0.0, &g).unwrap(), 0.0);
        assert_eq!(unducted_torque(0.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn grid_convergence() {
        let g = geom();
        let fine = FanGeometry {
            element_count: 64,
            ..geom()
        };
        for n in [40.0, 80.0, 120.0] {
            let (t1, q1) = g.loads(n).unwrap();
            let (t2, q2) = fine.loads(n).unwrap();
            assert!(((t2 - t1) / t1).abs() < 0.005);
            assert!(((q2 - q1) / q1).abs() < 0.005);
        }
    }

    #[test]
    fn loads_increase_with_speed() {
        let g = geom();
        let mut last = (0.0, 0.0);
        for i in 1..=30 {
            let (t, q) = g.loads(i as f64 * 5.0).unwrap();
            assert!(t > last.0 && q > last.1);
            last = (t, q);
        }
    }

    #[test]
    fn momentum_closure_holds_at_solution() {
        let g = geom();
        let n = 90.0;
        let mut v = 0.0;
        // Re-run the iteration here to reach the fixed point and compare.
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 100.0;
        for _ in 0..200 {
            v = 0.5 * (lo + hi);
            let t = element_sum(n, v, &g).thrust;
            if 2.0 * g.air_density * g.disc_area * v * v < t {
                lo = v;
            } else {
                hi = v;
            }
        }
        let t = element_sum(n, v, &g).thrust;
        assert_relative_eq!(unducted_thrust(n, &g).unwrap(), t, max_relative = 1e-7);
    }

    #[test]
    fn power_identity() {
        assert_eq!(fan_power(0.0, 5.0), 0.0);
        assert_eq!(fan_power(1.0, 1.0), 2.0 * PI);
        let g = geom();
        let op = g.operating_point(77.0).unwrap();
        assert_eq!(op.power, 2.0 * PI * 77.0 * op.torque);
    }

    #[test]
    fn duct_ratio_cases() {
        let g = geom();
        assert_eq!(duct_ratio(&g), 1.26);
        let wide = FanGeometry {
            outlet_area: 8.0 * g.disc_area,
            ..geom()
        };
        assert_relative_eq!(duct_ratio(&wide), 2.52, max_relative = 1e-14);
        let narrow = FanGeometry {
            outlet_area: 0.5 * g.disc_area,
            ..geom()
        };
        // 0.5^(1/3) = 0.7937005259840998
        assert_relative_eq!(duct_ratio(&narrow), 1.26 * 0.793_700_525_984_099_8, max_relative = 1e-14);
    }

    #[test]
    fn thrust_from_power_round_trip() {
        let g = geom();
        assert_eq!(thrust_from_power(0.0, &g).unwrap(), (0.0, 0.0));
        for p in [1_000.0, 8_000.0, 20_000.0] {
            let (t, n) = thrust_from_power(p, &g).unwrap();
            let q = unducted_torque(n, &g).unwrap();
            assert_relative_eq!(fan_power(n, q), p * g.transmission_efficiency, max_relative = 1e-6);
            assert_relative_eq!(t, duct_ratio(&g) * unducted_thrust(n, &g).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn thrust_from_power_bracket_failure() {
        let g = geom();
        assert!(matches!(thrust_from_power(1e9, &g), Err(Error::Bracket { .. })));
    }

    #[test]
    fn load_power_matches_fan_power() {
        let g = geom();
        assert_eq!(fan_load_power(0.0, &g).unwrap(), 0.0);
        let n = 64.0;
        let q = unducted_torque(n, &g).unwrap();
        assert_relative_eq!(
            fan_load_power(n, &g).unwrap(),
            fan_power(n, q) / g.transmission_efficiency,
            max_relative = 1e-14
        );
    }

    #[test]
    fn map_agrees_with_direct_solve() {
        let g = geom();
        let map = FanMap::from_geometry(&g).unwrap();
        for n in [20.0, 37.0, 80.0, 110.0, 150.0] {
            let (t, q) = g.loads(n).unwrap();
            let (tm, qm) = map.loads(n).unwrap();
            assert_relative_eq!(t, tm, max_relative = 1e-6);
            assert_relative_eq!(q, qm, max_relative = 1e-6);
        }
        let (a, na) = g.thrust_from_power(15_000.0).unwrap();
        let (b, nb) = map.thrust_from_power(15_000.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-6);
        assert_relative_eq!(na, nb, max_relative = 1e-6);
    }

    #[test]
    fn jacobian_matches_closed_form() {
        // With T = D·k_T·n_f², P = 2π·k_Q·n_f³ and P = Q·2π·n:
        //   T ∝ (Q·n)^(2/3), so ∂T/∂Q = (2/3)·T/Q and ∂T/∂n = (2/3)·T/n.
        let map = FanMap::from_geometry(&geom()).unwrap();
        let (q, n) = (20.0, 90.0);
        let t = map.thrust_from_power(q * 2.0 * PI * n).unwrap().0;
        let (dq, dn) = map.thrust_jacobian(q, n).unwrap();
        assert_relative_eq!(dq, 2.0 / 3.0 * t / q, max_relative = 1e-7);
        assert_relative_eq!(dn, 2.0 / 3.0 * t / n, max_relative = 1e-7);
        let direct = geom().thrust_jacobian(q, n).unwrap();
        assert_relative_eq!(direct.0, dq, max_relative = 1e-5);
        assert_relative_eq!(direct.1, dn, max_relative = 1e-5);
    }

    #[test]
    fn jacobian_step_halving() {
        let g = geom();
        let a = g.thrust_jacobian_with_step(15.0, 70.0, 1e-4).unwrap();
        let b = g.thrust_jacobian_with_step(15.0, 70.0, 5e-5).unwrap();
        assert_relative_eq!(a.0, b.0, max_relative = 1e-4);
        assert_relative_eq!(a.1, b.1, max_relative = 1e-4);
    }

    #[test]
    fn jacobian_zero_power_branch() {
        let map = FanMap::from_geometry(&geom()).unwrap();
        let (_, dn) = map.thrust_jacobian(0.0, 60.0).unwrap();
        assert_eq!(dn, 0.0);
    }

    #[test]
    fn validate_rejects_bad_geometry() {
        assert!(geom().validate().is_ok());
        let g = FanGeometry {
            element_count: 8,
            ..geom()
        };
        assert!(g.validate().is_err());
        let g = FanGeometry {
            root_cutout: 0.4,
            ..geom()
        };
        assert!(g.validate().is_err());
    }
}
