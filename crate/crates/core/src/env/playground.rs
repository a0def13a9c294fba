use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    legal_actions, new_scene, step, Action, EnvConfig, EnvError, EnvState, RenderStyle,
    SceneSpec, TransitionRecord,
};

/// An episodic environment instance: a scene that is regenerated every
/// `episode_len` steps, or on demand.
#[derive(Debug, Clone)]
pub struct Playground {
    config: EnvConfig,
    spec: SceneSpec,
    style: RenderStyle,
    rng: ChaCha8Rng,
    state: EnvState,
    episode_steps: usize,
    resets: usize,
}

impl Playground {
    pub fn new(
        config: EnvConfig,
        spec: SceneSpec,
        style: RenderStyle,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = new_scene(&spec, rng.gen(), config.max_objects)?;
        Ok(Playground {
            config,
            spec,
            style,
            rng,
            state,
            episode_steps: 0,
            resets: 0,
        })
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn style(&self) -> RenderStyle {
        self.style
    }

    /// Scene regenerations so far, excluding the initial scene.
    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn episode_steps(&self) -> usize {
        self.episode_steps
    }

    pub fn legal_actions(&self) -> Vec<Action> {
        legal_actions(&self.state, &self.config)
    }

    pub fn reset(&mut self) -> Result<(), EnvError> {
        self.state = new_scene(&self.spec, self.rng.gen(), self.config.max_objects)?;
        self.episode_steps = 0;
        self.resets += 1;
        Ok(())
    }

    /// Executes `action`; when the episode ends or no action remains legal the
    /// scene is regenerated after the step.
    pub fn step(&mut self, action: &Action) -> Result<TransitionRecord, EnvError> {
        let (next, record) = step(&self.state, action, &self.config, self.style)?;
        self.state = next;
        self.episode_steps += 1;
        if self.episode_steps >= self.config.episode_len || self.legal_actions().is_empty() {
            self.reset()?;
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episode_boundary_regenerates_scene() {
        let cfg = EnvConfig {
            episode_len: 3,
            ..EnvConfig::default()
        };
        let mut env = Playground::new(cfg, SceneSpec::default(), RenderStyle::Standard, 7).unwrap();
        for _ in 0..3 {
            let a = env.legal_actions()[0].clone();
            env.step(&a).unwrap();
        }
        assert_eq!(env.resets(), 1);
        assert_eq!(env.episode_steps(), 0);
        assert_eq!(env.state().standing_on, None);
    }

    #[test]
    fn illegal_action_rejected_without_state_change() {
        let mut env =
            Playground::new(EnvConfig::default(), SceneSpec::default(), RenderStyle::Standard, 1)
                .unwrap();
        let before = env.state().clone();
        assert!(env.step(&Action::Grasp).is_err());
        assert_eq!(env.state(), &before);
    }
}
