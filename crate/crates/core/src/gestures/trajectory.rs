use crate::kinematics::{clamp_bend, BendState, PuppetModel};
use crate::tolerance;

use super::{GestureDef, GestureError};

/// A gesture sampled at a fixed tick rate.
///
/// `N = ceil(duration * tick_hz)` samples span the closed interval
/// `[0, duration]`: sample `k` sits at `k * duration / (N - 1)`, so the first
/// and last samples land exactly on the ends of the gesture.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub name: String,
    pub samples: Vec<BendState>,
    pub duration_s: f64,
    pub looping: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `k`.
    pub fn sample_time(&self, k: usize) -> f64 {
        sample_time(k, self.samples.len(), self.duration_s)
    }

    pub fn first(&self) -> &BendState {
        &self.samples[0]
    }

    pub fn last(&self) -> &BendState {
        &self.samples[self.samples.len() - 1]
    }
}

fn sample_time(k: usize, n: usize, duration: f64) -> f64 {
    if n <= 1 {
        0.0
    } else {
        k as f64 * duration / (n - 1) as f64
    }
}

pub(crate) fn sample_count(duration_s: f64, tick_hz: f64) -> usize {
    ((duration_s * tick_hz - tolerance::TIME_S).ceil() as usize).max(1)
}

/// Samples the keyframe interpolation of `def`, clamping every angle into
/// its plane's range. Planes not named by a keyframe hold `neutral`.
pub fn compile_gesture(
    def: &GestureDef,
    model: &PuppetModel,
    neutral: &BendState,
    tick_hz: f64,
) -> Result<Trajectory, GestureError> {
    if !(tick_hz > 0.0 && tick_hz.is_finite()) {
        return Err(GestureError::InvalidTickRate(tick_hz));
    }
    for key in def.keyframes.iter().flat_map(|k| k.targets.keys()) {
        if model.plane(key).is_none() {
            return Err(GestureError::UnknownPlaneInKeyframe {
                gesture: def.name.clone(),
                plane: key.clone(),
            });
        }
    }
    // every model plane appears in each sample
    let mut base = BendState::zero(model);
    for (k, v) in neutral.iter() {
        if model.plane(k).is_some() {
            base.set(k.clone(), v);
        }
    }
    let n = sample_count(def.nominal_duration_s, tick_hz);
    let samples = (0..n)
        .map(|k| {
            let pose = def.pose_at(sample_time(k, n, def.nominal_duration_s), &base);
            clamp_pose(&pose, model)
        })
        .collect();
    Ok(Trajectory {
        name: def.name.clone(),
        samples,
        duration_s: def.nominal_duration_s,
        looping: def.is_loopable(),
    })
}

fn clamp_pose(pose: &BendState, model: &PuppetModel) -> BendState {
    pose.iter()
        .map(|(k, v)| {
            let clamped = model
                .plane(k)
                .and_then(|(seg, _)| clamp_bend(seg, &k.plane, v).ok())
                .unwrap_or(v);
            (k.clone(), clamped)
        })
        .collect()
}

/// Nearest-sample lookup. Looping trajectories wrap `t` modulo their
/// duration; others hold their last sample past the end.
pub fn sample_trajectory(traj: &Trajectory, t_s: f64) -> &BendState {
    let n = traj.samples.len();
    if n == 1 || traj.duration_s <= 0.0 {
        return &traj.samples[0];
    }
    let t = t_s.max(0.0);
    let t = if traj.looping { t % traj.duration_s } else { t };
    let idx = (t / traj.duration_s * (n - 1) as f64).round() as usize;
    &traj.samples[idx.min(n - 1)]
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::gestures::{builtin_library, GestureKind, Interpolation, Keyframe};
    use crate::kinematics::PlaneKey;

    fn ramp(to: f64) -> GestureDef {
        GestureDef {
            name: "Ramp".into(),
            kind: GestureKind::Discrete,
            keyframes: vec![
                Keyframe {
                    time_s: 0.0,
                    targets: [(PlaneKey::new("left_arm", "vertical"), 0.0)].into(),
                    interpolation: Interpolation::Linear,
                },
                Keyframe {
                    time_s: 1.0,
                    targets: [(PlaneKey::new("left_arm", "vertical"), to)].into(),
                    interpolation: Interpolation::Linear,
                },
            ],
            nominal_duration_s: 1.0,
            loopable: None,
            aliases: vec![],
        }
    }

    #[test]
    fn single_neutral_keyframe_gives_constant_trajectory() {
        let model = PuppetModel::demo();
        let lib = builtin_library(&model).unwrap();
        let def = GestureDef {
            name: "Still".into(),
            kind: GestureKind::Discrete,
            keyframes: vec![Keyframe {
                time_s: 0.0,
                targets: BTreeMap::new(),
                interpolation: Interpolation::Linear,
            }],
            nominal_duration_s: 1.0,
            loopable: None,
            aliases: vec![],
        };
        let traj = compile_gesture(&def, &model, lib.neutral(), 50.0).unwrap();
        assert_eq!(traj.len(), 50);
        assert!(traj.samples.iter().all(|s| s == lib.neutral()));
    }

    #[test]
    fn linear_ramp_sample_alignment() {
        let model = PuppetModel::demo();
        let traj = compile_gesture(&ramp(100.0), &model, &BendState::new(), 50.0).unwrap();
        assert_eq!(traj.len(), 50);
        let key = PlaneKey::new("left_arm", "vertical");
        for (k, s) in traj.samples.iter().enumerate() {
            let want = 100.0 * k as f64 / 49.0;
            assert!((s.get(&key).unwrap() - want).abs() < 1e-9, "sample {k}");
        }
        // dense resampling of the interpolant agrees with the samples
        let def = ramp(100.0);
        for k in 0..50 {
            let t = traj.sample_time(k);
            let dense = def.pose_at(t, &BendState::zero(&model));
            assert!((dense.get(&key).unwrap() - traj.samples[k].get(&key).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn over_range_keyframe_saturates() {
        let model = PuppetModel::demo();
        let traj = compile_gesture(&ramp(170.0), &model, &BendState::new(), 50.0).unwrap();
        let key = PlaneKey::new("left_arm", "vertical");
        assert_eq!(traj.last().get(&key), Some(150.0));
        assert!(traj.samples.iter().all(|s| s.get(&key).unwrap() <= 150.0));
    }

    #[test]
    fn unknown_plane_in_keyframe() {
        let model = PuppetModel::demo();
        let mut def = ramp(10.0);
        def.keyframes[1].targets.insert(PlaneKey::new("tail", "wag"), 1.0);
        assert!(matches!(
            compile_gesture(&def, &model, &BendState::new(), 50.0),
            Err(GestureError::UnknownPlaneInKeyframe { .. })
        ));
    }

    #[test]
    fn lookup_rules() {
        let model = PuppetModel::demo();
        let lib = builtin_library(&model).unwrap();
        let joy = lib.compile("Joy", &model, 50.0).unwrap().unwrap();
        assert_eq!(sample_trajectory(&joy, 0.0), joy.first());
        assert_eq!(sample_trajectory(&joy, 10.0), joy.last());

        let dance = lib.compile("Dancing", &model, 50.0).unwrap().unwrap();
        assert!(dance.looping);
        assert_eq!(
            sample_trajectory(&dance, dance.duration_s),
            sample_trajectory(&dance, 0.0)
        );
        assert_eq!(dance.first(), dance.last());
    }

    #[test]
    fn sample_count_tolerates_float_noise() {
        assert_eq!(sample_count(1.3, 50.0), 65);
        assert_eq!(sample_count(0.3, 50.0), 15);
        assert_eq!(sample_count(0.0, 50.0), 1);
    }
}
