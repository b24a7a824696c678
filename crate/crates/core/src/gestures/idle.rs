use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagCode, Diagnostic};
use crate::kinematics::{BendState, PlaneKey};

/// Parameters of the randomized idle sway.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdleSpec {
    pub plane: PlaneKey,
    /// Amplitude range `[min, max]`, degrees.
    pub amplitude_deg: [f64; 2],
    /// Period range `[min, max]`, seconds.
    pub period_s: [f64; 2],
}

impl Default for IdleSpec {
    fn default() -> Self {
        Self {
            plane: PlaneKey::new("body", "lateral"),
            amplitude_deg: [2.0, 5.0],
            period_s: [4.0, 8.0],
        }
    }
}

impl IdleSpec {
    pub(crate) fn validate(&self, diags: &mut Vec<Diagnostic>) {
        let [a0, a1] = self.amplitude_deg;
        let [p0, p1] = self.period_s;
        if !(a0 >= 0.0 && a0 <= a1 && a1.is_finite()) {
            diags.push(Diagnostic::new(
                "idle/amplitude_deg",
                DiagCode::BadIdleRange,
                format!("amplitude range [{a0}, {a1}] must satisfy 0 <= min <= max"),
            ));
        }
        if !(p0 > 0.0 && p0 <= p1 && p1.is_finite()) {
            diags.push(Diagnostic::new(
                "idle/period_s",
                DiagCode::BadIdleRange,
                format!("period range [{p0}, {p1}] must satisfy 0 < min <= max"),
            ));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Cycle {
    start_s: f64,
    period_s: f64,
    amplitude_deg: f64,
}

/// Seeded lateral sway: one full sine cycle per period, with amplitude and
/// period redrawn at every cycle boundary. The sine restarts at each
/// boundary, so the angle is continuous and passes through 0 there.
///
/// Cycles are generated lazily and cached; the angle at `t` depends only on
/// the seed and `t`, never on the order of queries.
#[derive(Clone, Debug)]
pub struct IdleSway {
    spec: IdleSpec,
    rng: ChaCha8Rng,
    cycles: Vec<Cycle>,
}

impl IdleSway {
    pub fn new(spec: IdleSpec, seed: u64) -> Self {
        Self {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cycles: Vec::new(),
        }
    }

    pub fn spec(&self) -> &IdleSpec {
        &self.spec
    }

    fn draw(&mut self, start_s: f64) -> Cycle {
        let [a0, a1] = self.spec.amplitude_deg;
        let [p0, p1] = self.spec.period_s;
        let amplitude_deg = if a1 > a0 { self.rng.gen_range(a0..=a1) } else { a0 };
        let period_s = if p1 > p0 { self.rng.gen_range(p0..=p1) } else { p0 };
        Cycle {
            start_s,
            period_s,
            amplitude_deg,
        }
    }

    fn cycle_at(&mut self, t_s: f64) -> Cycle {
        if self.cycles.is_empty() {
            let c = self.draw(0.0);
            self.cycles.push(c);
        }
        loop {
            let last = *self.cycles.last().unwrap();
            if t_s < last.start_s + last.period_s {
                break;
            }
            let next = self.draw(last.start_s + last.period_s);
            self.cycles.push(next);
        }
        let idx = self.cycles.partition_point(|c| c.start_s <= t_s);
        self.cycles[idx.saturating_sub(1)]
    }

    /// Sway angle in degrees at `t_s` (negative times count as 0).
    pub fn angle(&mut self, t_s: f64) -> f64 {
        let t = if t_s.is_finite() { t_s.max(0.0) } else { 0.0 };
        let c = self.cycle_at(t);
        c.amplitude_deg * (TAU * (t - c.start_s) / c.period_s).sin()
    }

    /// `neutral` with the sway added on the idle plane.
    pub fn pose(&mut self, t_s: f64, neutral: &BendState) -> BendState {
        let base = neutral.get(&self.spec.plane).unwrap_or(0.0);
        let angle = self.angle(t_s);
        neutral
            .clone()
            .with(&self.spec.plane.section, &self.spec.plane.plane, base + angle)
    }
}

/// Stateless form: builds a fresh generator from `seed`.
pub fn idle_pose(spec: &IdleSpec, seed: u64, t_s: f64, neutral: &BendState) -> BendState {
    IdleSway::new(spec.clone(), seed).pose(t_s, neutral)
}
