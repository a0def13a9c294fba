use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Bucket, EnvError, EnvState, ObjectClass, ObjectInstance, Stage, Variety};

/// `count` objects of one class and stage. A missing variety is drawn at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub class: ObjectClass,
    #[serde(default = "young")]
    pub stage: Stage,
    #[serde(default)]
    pub variety: Option<Variety>,
    pub count: usize,
}

fn young() -> Stage {
    Stage::Young
}

impl SceneEntry {
    pub fn water(count: usize) -> Self {
        SceneEntry {
            class: ObjectClass::Water,
            stage: Stage::Grown,
            variety: None,
            count,
        }
    }

    pub fn young(class: ObjectClass, count: usize) -> Self {
        SceneEntry {
            class,
            stage: Stage::Young,
            variety: None,
            count,
        }
    }

    pub fn fixed(variety: Variety, stage: Stage, count: usize) -> Self {
        SceneEntry {
            class: variety.class(),
            stage,
            variety: Some(variety),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub entries: Vec<SceneEntry>,
    /// Shuffle object order after sampling.
    #[serde(default = "yes")]
    pub shuffle: bool,
}

fn yes() -> bool {
    true
}

impl Default for SceneSpec {
    /// Three water, three seeds, one baby small and one baby big herbivore.
    fn default() -> Self {
        SceneSpec {
            entries: vec![
                SceneEntry::water(3),
                SceneEntry::young(ObjectClass::Plant, 3),
                SceneEntry::young(ObjectClass::SmallHerbivore, 1),
                SceneEntry::young(ObjectClass::BigHerbivore, 1),
            ],
            shuffle: true,
        }
    }
}

impl SceneSpec {
    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// Every young herbivore must be growable: demand for grown plants
    /// (one per small, two per big herbivore) may not exceed the supply.
    fn check_feasible(&self, scene: &[ObjectInstance]) -> Result<(), EnvError> {
        let count = |b: Bucket| scene.iter().filter(|o| o.bucket() == b).count();
        let demand = count(Bucket::BabySmallHerbivore) + 2 * count(Bucket::BabyBigHerbivore);
        let supply = count(Bucket::GrownPlant) + count(Bucket::Seed).min(count(Bucket::Water));
        if demand > supply {
            return Err(EnvError::Config(format!(
                "young herbivores need {demand} grown plants but the scene can supply {supply}"
            )));
        }
        Ok(())
    }
}

pub fn new_scene(spec: &SceneSpec, seed: u64, max_objects: usize) -> Result<EnvState, EnvError> {
    if spec.total() > max_objects {
        return Err(EnvError::Config(format!(
            "{} objects exceed the maximum of {max_objects}",
            spec.total()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = Vec::with_capacity(spec.total());
    for entry in &spec.entries {
        for _ in 0..entry.count {
            let obj = match (entry.class, entry.variety) {
                (ObjectClass::Water, None) => ObjectInstance::water(),
                (class, Some(v)) => ObjectInstance::from_parts(class, Some(v), entry.stage)?,
                (class, None) => {
                    let v = *Variety::all_of(class)
                        .choose(&mut rng)
                        .expect("non-water classes have varieties");
                    ObjectInstance::new(v, entry.stage)
                }
            };
            scene.push(obj);
        }
    }
    spec.check_feasible(&scene)?;
    if spec.shuffle {
        scene.shuffle(&mut rng);
    }
    Ok(EnvState::new(scene))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scene_composition() {
        let s = new_scene(&SceneSpec::default(), 0, 16).unwrap();
        assert_eq!(s.scene.len(), 8);
        assert_eq!(s.count_bucket(Bucket::Water), 3);
        assert_eq!(s.count_bucket(Bucket::Seed), 3);
        assert_eq!(s.count_bucket(Bucket::BabySmallHerbivore), 1);
        assert_eq!(s.count_bucket(Bucket::BabyBigHerbivore), 1);
        assert!(s.inventory.is_empty());
        assert_eq!(s.standing_on, None);
    }

    #[test]
    fn same_seed_same_scene() {
        let a = new_scene(&SceneSpec::default(), 42, 16).unwrap();
        let b = new_scene(&SceneSpec::default(), 42, 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_object_scene() {
        let spec = SceneSpec {
            entries: vec![
                SceneEntry::water(1),
                SceneEntry::fixed(Variety::Carrot, Stage::Young, 1),
            ],
            shuffle: false,
        };
        let s = new_scene(&spec, 0, 16).unwrap();
        assert_eq!(
            s.scene,
            vec![ObjectInstance::water(), ObjectInstance::seed(Variety::Carrot)]
        );
        assert!(s.inventory.is_empty());
    }

    #[test]
    fn feasibility() {
        let ok = SceneSpec {
            entries: vec![
                SceneEntry::young(ObjectClass::BigHerbivore, 1),
                SceneEntry::young(ObjectClass::Plant, 2),
                SceneEntry::water(2),
            ],
            shuffle: true,
        };
        assert!(new_scene(&ok, 1, 16).is_ok());
        let bad = SceneSpec {
            entries: vec![
                SceneEntry::young(ObjectClass::BigHerbivore, 1),
                SceneEntry::young(ObjectClass::Plant, 1),
            ],
            shuffle: true,
        };
        assert!(matches!(new_scene(&bad, 1, 16), Err(EnvError::Config(_))));
    }

    #[test]
    fn too_many_objects() {
        let spec = SceneSpec {
            entries: vec![SceneEntry::water(20)],
            shuffle: false,
        };
        assert!(matches!(new_scene(&spec, 0, 16), Err(EnvError::Config(_))));
    }
}
