//! Command streams and the kinematic trajectory they induce.
//!
//! Commands are (pitch, yaw, roll) triples in `[-1, 1]`. A flight plan is a
//! cyclic list of manoeuvres, each held for a random number of frames; the
//! resulting piecewise-constant stream is what the command link carries.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One command triple.
pub type Command = [f64; 3];

/// Kinematic trajectory sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub positions: Vec<[f64; 3]>,
    pub commands: Vec<Command>,
    pub dt: f64,
}

/// Euler-integrate `velocity = gain * command` from `start` with step `dt`.
/// Pitch drives x, roll drives y and yaw drives z.
pub fn integrate_trajectory(commands: &[Command], start: [f64; 3], gain: f64, dt: f64) -> Trajectory {
    let mut positions = Vec::with_capacity(commands.len() + 1);
    positions.push(start);
    let mut p = start;
    for c in commands {
        p = [
            p[0] + gain * c[0] * dt,
            p[1] + gain * c[2] * dt,
            p[2] + gain * c[1] * dt,
        ];
        positions.push(p);
    }
    Trajectory {
        positions,
        commands: commands.to_vec(),
        dt,
    }
}

/// Flight-plan generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct FlightPlan {
    /// Manoeuvres visited cyclically.
    pub manoeuvres: Vec<Command>,
    /// Inclusive range of frames each manoeuvre is held.
    pub hold_min: usize,
    pub hold_max: usize,
}

impl Default for FlightPlan {
    fn default() -> Self {
        Self {
            manoeuvres: vec![
                [0.0, 0.0, 0.0],
                [0.6, 0.0, 0.0],
                [0.6, 0.4, -0.2],
                [0.2, -0.6, 0.4],
                [-0.4, 0.2, 0.0],
            ],
            hold_min: 90,
            hold_max: 160,
        }
    }
}

impl FlightPlan {
    pub fn validate(&self) -> Result<()> {
        if self.manoeuvres.is_empty() {
            return Err(Error::Config("flight plan needs at least one manoeuvre".into()));
        }
        if self.hold_min == 0 || self.hold_min > self.hold_max {
            return Err(Error::Config("flight plan needs 1 <= hold_min <= hold_max".into()));
        }
        if self
            .manoeuvres
            .iter()
            .flatten()
            .any(|v| !(-1.0..=1.0).contains(v))
        {
            return Err(Error::Config("manoeuvre commands must lie in [-1, 1]".into()));
        }
        Ok(())
    }

    /// Command for every frame of a `len`-frame flight.
    pub fn commands<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<Command> {
        let mut out = Vec::with_capacity(len);
        let mut k = 0;
        while out.len() < len {
            let hold = rng.gen_range(self.hold_min..=self.hold_max);
            let c = self.manoeuvres[k % self.manoeuvres.len()];
            out.extend(std::iter::repeat_n(c, hold.min(len - out.len())));
            k += 1;
        }
        out
    }
}

/// Bits used per command axis.
pub const BITS_PER_AXIS: usize = 6;

/// Quantize a command triple to `3 * BITS_PER_AXIS` bits, axis by axis,
/// most significant bit first.
pub fn command_bits(c: &Command) -> Vec<u8> {
    let levels = (1usize << BITS_PER_AXIS) - 1;
    let mut bits = Vec::with_capacity(3 * BITS_PER_AXIS);
    for v in c {
        let q = (((v.clamp(-1.0, 1.0) + 1.0) / 2.0) * levels as f64).round() as usize;
        bits.extend((0..BITS_PER_AXIS).rev().map(|i| ((q >> i) & 1) as u8));
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_commands_stay_put() {
        let t = integrate_trajectory(&[[0.0; 3]; 10], [1.0, 2.0, 3.0], 5.0, 0.05);
        assert_eq!(t.positions.len(), 11);
        assert!(t.positions.iter().all(|p| *p == [1.0, 2.0, 3.0]));
    }

    #[test]
    fn plan_is_piecewise_constant() {
        let plan = FlightPlan::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = plan.commands(600, &mut rng);
        assert_eq!(c.len(), 600);
        let changes = c.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(changes <= 600 / plan.hold_min);
    }

    #[test]
    fn bits_extremes() {
        assert_eq!(command_bits(&[-1.0, -1.0, -1.0]), vec![0; 18]);
        assert_eq!(command_bits(&[1.0, 1.0, 1.0]), vec![1; 18]);
    }
}
