use super::{Burgers, HyperbolicSystem, RollWave, Side, WaveShape};
use nalgebra::DVector;
use std::sync::Arc;

#[derive(Debug)]
struct Sawtooth {
    period: f64,
    c: f64,
}

impl WaveShape for Sawtooth {
    fn eval(&self, y: f64, order: usize) -> DVector<f64> {
        let v = match order {
            0 => self.c + y - 0.5 * self.period,
            1 => 1.0,
            _ => 0.0,
        };
        DVector::from_element(1, v)
    }

    fn trace(&self, side: Side, order: usize) -> DVector<f64> {
        match order {
            0 => DVector::from_element(1, self.c - side.sign() * 0.5 * self.period),
            1 => DVector::from_element(1, 1.0),
            _ => DVector::zeros(1),
        }
    }
}

/// Burgers flux with source `g(u) = u − c`: between shocks
/// `u = c + (x − ct mod L) − L/2`, one shock per period moving with speed `c`.
pub fn build_sawtooth_rollwave(period: f64, c: f64) -> RollWave {
    assert!(period > 0.0, "period must be positive");
    RollWave {
        system: HyperbolicSystem::new(Burgers { rate: 1.0, offset: c }),
        period,
        m: 1,
        speed: c,
        x0: 0.0,
        t_star: 1.0,
        r: period / 4.0,
        label: format!("sawtooth(L={period}, c={c})"),
        shape: Arc::new(Sawtooth { period, c }),
    }
}
