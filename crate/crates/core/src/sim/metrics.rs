//! Relative-error series and segment statistics.

use std::fmt::Write as _;

use serde::Serialize;

use super::scenario::{applied_input, ScenarioConfig, TrajectoryRecord};
use crate::engine::InputBounds;

/// `(actual − reference)/reference` in percent.
pub fn relative_error(actual: f64, reference: f64) -> f64 {
    (actual - reference) / reference * 100.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Segment {
    /// Before the ramp starts.
    Idle,
    Ramp,
    /// Settling window after the ramp or the λ switch.
    Settling,
    Steady,
}

pub fn segment(k: usize, sc: &ScenarioConfig) -> Segment {
    if k < sc.ramp_start {
        Segment::Idle
    } else if k < sc.ramp_end {
        Segment::Ramp
    } else if k < sc.ramp_end + sc.settle_steps || (sc.lambda_switch..sc.lambda_switch + sc.settle_steps).contains(&k) {
        Segment::Settling
    } else {
        Segment::Steady
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorStats {
    pub count: usize,
    pub thrust_min: f64,
    pub thrust_max: f64,
    pub thrust_mare: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_mare: f64,
}

impl ErrorStats {
    fn from_records<'a>(rs: impl Iterator<Item = &'a TrajectoryRecord>) -> Self {
        let mut s = ErrorStats {
            thrust_min: f64::INFINITY,
            thrust_max: f64::NEG_INFINITY,
            lambda_min: f64::INFINITY,
            lambda_max: f64::NEG_INFINITY,
            ..Self::default()
        };
        for r in rs {
            s.count += 1;
            s.thrust_min = s.thrust_min.min(r.thrust_rel_err);
            s.thrust_max = s.thrust_max.max(r.thrust_rel_err);
            s.thrust_mare += r.thrust_rel_err.abs();
            s.lambda_min = s.lambda_min.min(r.lambda_rel_err);
            s.lambda_max = s.lambda_max.max(r.lambda_rel_err);
            s.lambda_mare += r.lambda_rel_err.abs();
        }
        if s.count == 0 {
            return Self::default();
        }
        s.thrust_mare /= s.count as f64;
        s.lambda_mare /= s.count as f64;
        s
    }

    pub fn thrust_within(&self, band: f64) -> bool {
        self.count > 0 && self.thrust_min >= -band && self.thrust_max <= band
    }

    pub fn lambda_within(&self, band: f64) -> bool {
        self.count > 0 && self.lambda_min >= -band && self.lambda_max <= band
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub steps: usize,
    pub ramp: ErrorStats,
    pub steady: ErrorStats,
    /// Applied inputs outside the plant box.
    pub input_violations: usize,
    pub solver_unconverged: usize,
    pub held_steps: usize,
}

pub fn compute_metrics(records: &[TrajectoryRecord], sc: &ScenarioConfig, bounds: &InputBounds) -> Metrics {
    let of = |seg: Segment| records.iter().filter(move |r| segment(r.step, sc) == seg);
    Metrics {
        steps: records.len(),
        ramp: ErrorStats::from_records(of(Segment::Ramp)),
        steady: ErrorStats::from_records(of(Segment::Steady)),
        input_violations: records.iter().filter(|r| !bounds.contains(&applied_input(r))).count(),
        solver_unconverged: records.iter().filter(|r| !r.converged).count(),
        held_steps: records.iter().filter(|r| r.held).count(),
    }
}

impl Metrics {
    pub fn render(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{title}: {} steps", self.steps);
        for (name, e) in [("ramp", &self.ramp), ("steady", &self.steady)] {
            let _ = writeln!(
                s,
                "  {name:<6} n={:<4} thrust err [{:+.3}, {:+.3}] % (mean |e| {:.3} %)  lambda err [{:+.3}, {:+.3}] % (mean |e| {:.3} %)",
                e.count, e.thrust_min, e.thrust_max, e.thrust_mare, e.lambda_min, e.lambda_max, e.lambda_mare
            );
        }
        let _ = writeln!(
            s,
            "  input violations {}  unconverged QPs {}  held steps {}",
            self.input_violations, self.solver_unconverged, self.held_steps
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(5.0, 5.0), 0.0);
        assert_relative_eq!(relative_error(1.01 * 80.0, 80.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(relative_error(0.98, 1.0), -2.0, max_relative = 1e-12);
    }

    #[test]
    fn ramp_series() {
        // A ramp tracked one step late: actual(k) = ref(k − 1), so the error
        // is −slope/ref(k) = −(70/90)/ref(k) · 100 %.
        let sc = ScenarioConfig::default();
        for k in 11..100 {
            let r = sc.reference(k).0;
            let a = sc.reference(k - 1).0;
            assert_relative_eq!(relative_error(a, r), -(70.0 / 90.0) / r * 100.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn segments() {
        let sc = ScenarioConfig::default();
        assert_eq!(segment(0, &sc), Segment::Idle);
        assert_eq!(segment(10, &sc), Segment::Ramp);
        assert_eq!(segment(105, &sc), Segment::Settling);
        assert_eq!(segment(120, &sc), Segment::Steady);
        assert_eq!(segment(160, &sc), Segment::Settling);
        assert_eq!(segment(170, &sc), Segment::Steady);
    }
}
