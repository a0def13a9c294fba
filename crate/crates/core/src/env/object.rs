use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Water,
    Plant,
    SmallHerbivore,
    BigHerbivore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variety {
    Carrot,
    Potato,
    Beet,
    Berry,
    Pea,
    Pig,
    Cow,
    Sheep,
    Elephant,
    Giraffe,
    Rhinoceros,
}

impl Variety {
    pub const PLANTS: [Variety; 5] = [
        Variety::Carrot,
        Variety::Potato,
        Variety::Beet,
        Variety::Berry,
        Variety::Pea,
    ];
    pub const SMALL_HERBIVORES: [Variety; 3] = [Variety::Pig, Variety::Cow, Variety::Sheep];
    pub const BIG_HERBIVORES: [Variety; 3] =
        [Variety::Elephant, Variety::Giraffe, Variety::Rhinoceros];

    pub fn class(self) -> ObjectClass {
        match self {
            Variety::Carrot | Variety::Potato | Variety::Beet | Variety::Berry | Variety::Pea => {
                ObjectClass::Plant
            }
            Variety::Pig | Variety::Cow | Variety::Sheep => ObjectClass::SmallHerbivore,
            Variety::Elephant | Variety::Giraffe | Variety::Rhinoceros => ObjectClass::BigHerbivore,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variety::Carrot => "carrot",
            Variety::Potato => "potato",
            Variety::Beet => "beet",
            Variety::Berry => "berry",
            Variety::Pea => "pea",
            Variety::Pig => "pig",
            Variety::Cow => "cow",
            Variety::Sheep => "sheep",
            Variety::Elephant => "elephant",
            Variety::Giraffe => "giraffe",
            Variety::Rhinoceros => "rhinoceros",
        }
    }

    pub fn all_of(class: ObjectClass) -> &'static [Variety] {
        match class {
            ObjectClass::Water => &[],
            ObjectClass::Plant => &Self::PLANTS,
            ObjectClass::SmallHerbivore => &Self::SMALL_HERBIVORES,
            ObjectClass::BigHerbivore => &Self::BIG_HERBIVORES,
        }
    }

    pub fn from_name(name: &str) -> Option<Variety> {
        Self::PLANTS
            .iter()
            .chain(&Self::SMALL_HERBIVORES)
            .chain(&Self::BIG_HERBIVORES)
            .copied()
            .find(|v| v.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Young,
    Grown,
}

/// The seven dynamically distinct kinds of object, ignoring variety.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bucket {
    Water,
    Seed,
    GrownPlant,
    BabySmallHerbivore,
    GrownSmallHerbivore,
    BabyBigHerbivore,
    GrownBigHerbivore,
}

impl Bucket {
    pub const ALL: [Bucket; 7] = [
        Bucket::Water,
        Bucket::Seed,
        Bucket::GrownPlant,
        Bucket::BabySmallHerbivore,
        Bucket::GrownSmallHerbivore,
        Bucket::BabyBigHerbivore,
        Bucket::GrownBigHerbivore,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One object in the scene or inventory. Construct through [`ObjectInstance::water`]
/// or [`ObjectInstance::new`] so that water never carries a variety or a young stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawObject")]
pub struct ObjectInstance {
    class: ObjectClass,
    variety: Option<Variety>,
    stage: Stage,
}

#[derive(Deserialize)]
struct RawObject {
    class: ObjectClass,
    variety: Option<Variety>,
    stage: Stage,
}

impl TryFrom<RawObject> for ObjectInstance {
    type Error = EnvError;

    fn try_from(raw: RawObject) -> Result<Self, EnvError> {
        ObjectInstance::from_parts(raw.class, raw.variety, raw.stage)
    }
}

impl ObjectInstance {
    pub const fn water() -> Self {
        ObjectInstance {
            class: ObjectClass::Water,
            variety: None,
            stage: Stage::Grown,
        }
    }

    pub fn new(variety: Variety, stage: Stage) -> Self {
        ObjectInstance {
            class: variety.class(),
            variety: Some(variety),
            stage,
        }
    }

    pub fn seed(variety: Variety) -> Self {
        debug_assert_eq!(variety.class(), ObjectClass::Plant);
        Self::new(variety, Stage::Young)
    }

    pub fn young(variety: Variety) -> Self {
        Self::new(variety, Stage::Young)
    }

    pub fn grown(variety: Variety) -> Self {
        Self::new(variety, Stage::Grown)
    }

    /// Rebuilds an instance from serialized parts, checking the water invariants.
    pub fn from_parts(
        class: ObjectClass,
        variety: Option<Variety>,
        stage: Stage,
    ) -> Result<Self, EnvError> {
        match (class, variety) {
            (ObjectClass::Water, None) if stage == Stage::Grown => Ok(Self::water()),
            (ObjectClass::Water, _) => Err(EnvError::InvalidObject(
                "water has no variety and no young stage".into(),
            )),
            (c, Some(v)) if v.class() == c => Ok(Self::new(v, stage)),
            _ => Err(EnvError::InvalidObject(format!(
                "variety {variety:?} does not belong to class {class:?}"
            ))),
        }
    }

    pub fn class(&self) -> ObjectClass {
        self.class
    }

    pub fn variety(&self) -> Option<Variety> {
        self.variety
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn is_water(&self) -> bool {
        self.class == ObjectClass::Water
    }

    pub fn is_young(&self) -> bool {
        self.stage == Stage::Young && !self.is_water()
    }

    pub fn bucket(&self) -> Bucket {
        match (self.class, self.stage) {
            (ObjectClass::Water, _) => Bucket::Water,
            (ObjectClass::Plant, Stage::Young) => Bucket::Seed,
            (ObjectClass::Plant, Stage::Grown) => Bucket::GrownPlant,
            (ObjectClass::SmallHerbivore, Stage::Young) => Bucket::BabySmallHerbivore,
            (ObjectClass::SmallHerbivore, Stage::Grown) => Bucket::GrownSmallHerbivore,
            (ObjectClass::BigHerbivore, Stage::Young) => Bucket::BabyBigHerbivore,
            (ObjectClass::BigHerbivore, Stage::Grown) => Bucket::GrownBigHerbivore,
        }
    }

    pub fn grown_form(&self) -> Self {
        ObjectInstance {
            stage: Stage::Grown,
            ..*self
        }
    }

    /// "potato seed", "baby rhinoceros", "cow", "water".
    pub fn display_name(&self) -> String {
        match (self.variety, self.stage) {
            (None, _) => "water".to_string(),
            (Some(v), Stage::Grown) => v.name().to_string(),
            (Some(v), Stage::Young) if v.class() == ObjectClass::Plant => {
                format!("{} seed", v.name())
            }
            (Some(v), Stage::Young) => format!("baby {}", v.name()),
        }
    }

    pub fn from_display_name(name: &str) -> Option<Self> {
        if name == "water" {
            return Some(Self::water());
        }
        if let Some(rest) = name.strip_suffix(" seed") {
            let v = Variety::from_name(rest)?;
            return (v.class() == ObjectClass::Plant).then(|| Self::seed(v));
        }
        if let Some(rest) = name.strip_prefix("baby ") {
            let v = Variety::from_name(rest)?;
            return (v.class() != ObjectClass::Plant).then(|| Self::young(v));
        }
        Variety::from_name(name).map(Self::grown)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_names() {
        assert_eq!(
            ObjectInstance::seed(Variety::Potato).display_name(),
            "potato seed"
        );
        assert_eq!(
            ObjectInstance::young(Variety::Rhinoceros).display_name(),
            "baby rhinoceros"
        );
        assert_eq!(ObjectInstance::grown(Variety::Cow).display_name(), "cow");
        assert_eq!(ObjectInstance::water().display_name(), "water");
    }

    #[test]
    fn display_name_round_trips() {
        let mut all = vec![ObjectInstance::water()];
        for class in [
            ObjectClass::Plant,
            ObjectClass::SmallHerbivore,
            ObjectClass::BigHerbivore,
        ] {
            for &v in Variety::all_of(class) {
                all.push(ObjectInstance::young(v));
                all.push(ObjectInstance::grown(v));
            }
        }
        for o in all {
            assert_eq!(ObjectInstance::from_display_name(&o.display_name()), Some(o));
        }
        assert_eq!(ObjectInstance::from_display_name("baby carrot"), None);
        assert_eq!(ObjectInstance::from_display_name("cow seed"), None);
    }

    #[test]
    fn water_invariants_enforced() {
        assert!(ObjectInstance::from_parts(ObjectClass::Water, None, Stage::Young).is_err());
        assert!(
            ObjectInstance::from_parts(ObjectClass::Water, Some(Variety::Pea), Stage::Grown)
                .is_err()
        );
        assert!(
            ObjectInstance::from_parts(ObjectClass::Plant, Some(Variety::Cow), Stage::Grown)
                .is_err()
        );
        assert!(!ObjectInstance::water().is_young());
    }
}
