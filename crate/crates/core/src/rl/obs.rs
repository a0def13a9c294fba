//! Symbolic observations and the bucketed action head.
//!
//! Observation layout (17 values): scene counts per bucket (7), standing
//! one-hot over the buckets plus "none" (8), held water and grown plants (2).
//! Head actions: go to a bucket (7), grasp, release water, release a grown
//! plant, release both.

use crate::env::{legal_actions, Action, Bucket, EnvConfig, EnvState, ObjectInstance};

pub const OBS_DIM: usize = 17;
pub const N_ACTIONS: usize = 11;

pub type ObsVector = [f64; OBS_DIM];
pub type ActionMask = [bool; N_ACTIONS];

pub const GRASP: usize = 7;
pub const RELEASE_WATER: usize = 8;
pub const RELEASE_PLANT: usize = 9;
pub const RELEASE_ALL: usize = 10;

pub fn encode_obs(state: &EnvState) -> ObsVector {
    let mut obs = [0.0; OBS_DIM];
    for o in &state.scene {
        obs[o.bucket().index()] += 1.0;
    }
    let standing = state.stood_on().map_or(Bucket::ALL.len(), |o| o.bucket().index());
    obs[7 + standing] = 1.0;
    obs[15] = state.inventory_count(Bucket::Water) as f64;
    obs[16] = state.inventory_count(Bucket::GrownPlant) as f64;
    obs
}

/// Head index of a concrete action, if the head can express it.
pub fn head_index(state: &EnvState, action: &Action) -> Option<usize> {
    match action {
        Action::GoTo(name) => state
            .resolve_name(name)
            .map(|i| state.scene[i].bucket().index()),
        Action::Grasp => Some(GRASP),
        Action::Release(name) => match ObjectInstance::from_display_name(name)?.bucket() {
            Bucket::Water => Some(RELEASE_WATER),
            Bucket::GrownPlant => Some(RELEASE_PLANT),
            _ => None,
        },
        Action::ReleaseAll => Some(RELEASE_ALL),
    }
}

pub fn action_mask(state: &EnvState, config: &EnvConfig) -> ActionMask {
    let mut mask = [false; N_ACTIONS];
    for a in legal_actions(state, config) {
        if let Some(i) = head_index(state, &a) {
            mask[i] = true;
        }
    }
    mask
}

/// The first legal concrete action mapping to head action `index`.
pub fn to_action(state: &EnvState, config: &EnvConfig, index: usize) -> Option<Action> {
    legal_actions(state, config)
        .into_iter()
        .find(|a| head_index(state, a) == Some(index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{new_scene, step, RenderStyle, SceneSpec};

    #[test]
    fn fresh_default_scene() {
        let s = new_scene(&SceneSpec::default(), 0, 16).unwrap();
        let obs = encode_obs(&s);
        assert_eq!(&obs[..7], &[3.0, 3.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(obs[14], 1.0);
        assert_eq!(obs[7..15].iter().sum::<f64>(), 1.0);
        assert_eq!(&obs[15..], &[0.0, 0.0]);
        let mask = action_mask(&s, &EnvConfig::default());
        assert_eq!(mask, [true, true, false, true, false, true, false, false, false, false, false]);
    }

    #[test]
    fn grasp_moves_water_into_inventory() {
        let cfg = EnvConfig::default();
        let s = new_scene(&SceneSpec::default(), 0, 16).unwrap();
        let (s, _) = step(&s, &Action::GoTo("water".into()), &cfg, RenderStyle::Standard).unwrap();
        assert_eq!(encode_obs(&s)[7], 1.0);
        let (s, _) = step(&s, &Action::Grasp, &cfg, RenderStyle::Standard).unwrap();
        let obs = encode_obs(&s);
        assert_eq!(obs[0], 2.0);
        assert_eq!(&obs[15..], &[1.0, 0.0]);
        assert_eq!(obs[14], 1.0);
    }

    #[test]
    fn empty_scene_is_valid() {
        let s = EnvState::new(Vec::new());
        let obs = encode_obs(&s);
        assert_eq!(obs.iter().sum::<f64>(), 1.0);
        assert_eq!(action_mask(&s, &EnvConfig::default()), [false; N_ACTIONS]);
    }

    #[test]
    fn mask_matches_mapped_actions() {
        let cfg = EnvConfig::default();
        let mut s = new_scene(&SceneSpec::default(), 9, 16).unwrap();
        for k in 0..40 {
            let mask = action_mask(&s, &cfg);
            for i in 0..N_ACTIONS {
                let a = to_action(&s, &cfg, i);
                assert_eq!(mask[i], a.is_some());
                if let Some(a) = a {
                    assert_eq!(head_index(&s, &a), Some(i));
                }
            }
            let legal: Vec<usize> = (0..N_ACTIONS).filter(|&i| mask[i]).collect();
            let a = to_action(&s, &cfg, legal[(k * 7) % legal.len()]).unwrap();
            s = step(&s, &a, &cfg, RenderStyle::Standard).unwrap().0;
        }
    }
}
