//! Goal-directed action choice for the scripted oracles.
//!
//! [`next_action`] looks only at the current state and returns the next move
//! towards producing a transition of the requested type, recursing into
//! sub-goals (a grown plant for a herbivore, for instance). `None` means the
//! scene cannot produce the target any more and has to be regenerated.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::{legal_actions, Action, Bucket, EnvConfig, EnvState, TransitionType, INVENTORY_SLOTS};

fn go_to<R: Rng + ?Sized>(state: &EnvState, bucket: Bucket, rng: &mut R) -> Option<Action> {
    let names: Vec<String> = state
        .scene
        .iter()
        .enumerate()
        .filter(|(i, o)| Some(*i) != state.standing_on && o.bucket() == bucket)
        .map(|(_, o)| o.display_name())
        .collect();
    names.choose(rng).cloned().map(Action::GoTo)
}

fn standing_on(state: &EnvState, bucket: Bucket) -> bool {
    state.stood_on().is_some_and(|o| o.bucket() == bucket)
}

fn held_name(state: &EnvState, bucket: Bucket) -> Option<String> {
    state
        .inventory
        .iter()
        .find(|o| o.bucket() == bucket)
        .map(|o| o.display_name())
}

fn full(state: &EnvState) -> bool {
    state.inventory.len() >= INVENTORY_SLOTS
}

fn intended<R: Rng + ?Sized>(
    state: &EnvState,
    target: TransitionType,
    rng: &mut R,
) -> Option<Action> {
    use TransitionType::*;
    match target {
        Standing => {
            let names: Vec<Action> = legal_actions(state, &EnvConfig::default())
                .into_iter()
                .filter(|a| matches!(a, Action::GoTo(_)))
                .collect();
            names.choose(rng).cloned()
        }
        Holding1 | Holding2 => {
            // a second item is picked up after a first one
            let max_held = if target == Holding1 { 0 } else { 1 };
            if state.inventory.len() > max_held {
                return None;
            }
            if standing_on(state, Bucket::Water) || standing_on(state, Bucket::GrownPlant) {
                return Some(Action::Grasp);
            }
            let bucket = if state.count_bucket(Bucket::Water) >= state.count_bucket(Bucket::GrownPlant) {
                Bucket::Water
            } else {
                Bucket::GrownPlant
            };
            go_to(state, bucket, rng)
        }
        GrowPlant => {
            if let Some(water) = held_name(state, Bucket::Water) {
                if standing_on(state, Bucket::Seed) {
                    return Some(Action::Release(water));
                }
                return go_to(state, Bucket::Seed, rng);
            }
            if full(state) || state.count_bucket(Bucket::Seed) == 0 {
                return None;
            }
            if standing_on(state, Bucket::Water) {
                return Some(Action::Grasp);
            }
            go_to(state, Bucket::Water, rng)
        }
        GrowSmallHerbivore => {
            if state.count_bucket(Bucket::BabySmallHerbivore) == 0 {
                return None;
            }
            if let Some(plant) = held_name(state, Bucket::GrownPlant) {
                if standing_on(state, Bucket::BabySmallHerbivore) {
                    return Some(Action::Release(plant));
                }
                return go_to(state, Bucket::BabySmallHerbivore, rng);
            }
            acquire_plant(state, rng)
        }
        GrowBigHerbivore => {
            if state.count_bucket(Bucket::BabyBigHerbivore) == 0 {
                return None;
            }
            if state.inventory_count(Bucket::GrownPlant) == 2 {
                if standing_on(state, Bucket::BabyBigHerbivore) {
                    return Some(Action::ReleaseAll);
                }
                return go_to(state, Bucket::BabyBigHerbivore, rng);
            }
            acquire_plant(state, rng)
        }
    }
}

/// Grasp a grown plant, growing one first when none is available.
fn acquire_plant<R: Rng + ?Sized>(state: &EnvState, rng: &mut R) -> Option<Action> {
    if state.inventory_count(Bucket::Water) > 0 {
        return intended(state, TransitionType::GrowPlant, rng);
    }
    if full(state) {
        return None;
    }
    if standing_on(state, Bucket::GrownPlant) {
        return Some(Action::Grasp);
    }
    go_to(state, Bucket::GrownPlant, rng).or_else(|| intended(state, TransitionType::GrowPlant, rng))
}

/// Next action towards a `target` transition, or `None` when the scene cannot
/// produce one. Returned actions are always legal.
pub fn next_action<R: Rng + ?Sized>(
    state: &EnvState,
    target: TransitionType,
    config: &EnvConfig,
    rng: &mut R,
) -> Option<Action> {
    let action = intended(state, target, rng)?;
    legal_actions(state, config).contains(&action).then_some(action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{new_scene, step, RenderStyle, SceneSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reach(target: TransitionType, seed: u64) -> Vec<TransitionType> {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = new_scene(&SceneSpec::default(), seed, 16).unwrap();
        let mut seen = Vec::new();
        for _ in 0..40 {
            let a = next_action(&s, target, &cfg, &mut rng).expect("fresh scene is feasible");
            let (next, rec) = step(&s, &a, &cfg, RenderStyle::Standard).unwrap();
            seen.push(rec.ttype);
            s = next;
            if rec.ttype == target {
                return seen;
            }
        }
        panic!("{target} not reached");
    }

    #[test]
    fn every_type_is_reachable_from_a_fresh_scene() {
        for seed in 0..20 {
            for t in TransitionType::ALL {
                let seen = reach(t, seed);
                assert_eq!(seen.last(), Some(&t));
            }
        }
    }

    #[test]
    fn minimal_grow_scripts() {
        use TransitionType::*;
        assert_eq!(reach(GrowPlant, 1), vec![Standing, Holding1, Standing, GrowPlant]);
        assert_eq!(reach(GrowSmallHerbivore, 1).len(), 7);
        // grow, grasp, grow again, grasp, deliver
        assert_eq!(reach(GrowBigHerbivore, 1).len(), 12);
    }

    #[test]
    fn exhausted_scene_is_infeasible() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = EnvState::new(vec![crate::env::ObjectInstance::water()]);
        assert_eq!(next_action(&s, TransitionType::GrowPlant, &cfg, &mut rng), None);
        assert_eq!(next_action(&s, TransitionType::GrowSmallHerbivore, &cfg, &mut rng), None);
    }
}
