//! Engine and fan modules agree once the coupled plant settles.

use dfls::engine::ControlInput;
use dfls::fan::{thrust_from_power, FanGeometry};
use dfls::plant::Dfls;
use dfls::sim::{build_plant, Config};

#[test]
fn settled_thrust_matches_the_power_map() {
    let cfg = Config::default();
    let p = build_plant(&cfg).unwrap();
    for (kgf, lambda) in [(20.0, 0.9), (50.0, 1.0), (75.0, 0.85)] {
        // a feasible input near a known trim, started from elsewhere
        let held = p.trim(dfls::kgf_to_newton(kgf), lambda).unwrap().input;
        let (tps, fuel) = (held.tps * 1.03, held.fuel_rate * 0.99);
        let u = ControlInput::new(tps, fuel);
        let mut s = p.trim_at_speed(70.0, 1.0).unwrap().state;
        for _ in 0..1500 {
            s = p.step(&s, &u).unwrap();
        }
        let next = p.step(&s, &u).unwrap();
        assert!((next.speed - s.speed).abs() < 1e-9 * s.speed, "not settled at {tps}");
        // the plant runs on the fitted fan map; the reference is the direct blade-element solve
        let (t, _) = thrust_from_power(Dfls::brake_power(&s), &FanGeometry::default()).unwrap();
        let rel = (p.thrust(&s) - t).abs() / t;
        assert!(rel < 1e-3, "tps {tps}: {rel}");
    }
}
