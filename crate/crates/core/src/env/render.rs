use serde::{Deserialize, Serialize};

use super::{Action, EnvState, ObjectInstance, TransitionType};

/// Sentence syntax used for observations.
///
/// `Generalization` inverts the sentences ("The water is beneath you.") so that
/// hypotheses which memorised the standard phrasing no longer match verbatim.
/// Actions render identically in both styles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderStyle {
    #[default]
    Standard,
    Generalization,
}

fn the_list(objects: &[ObjectInstance]) -> String {
    objects
        .iter()
        .map(|o| format!("the {}", o.display_name()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn inventory_sentence(inventory: &[ObjectInstance], style: RenderStyle) -> String {
    let names: Vec<String> = inventory.iter().map(|o| o.display_name()).collect();
    match (style, names.as_slice()) {
        (RenderStyle::Standard, []) => "In your inventory, there is nothing.".to_string(),
        (RenderStyle::Standard, [a]) => format!("In your inventory, there is the {a}."),
        (RenderStyle::Standard, [a, b]) => {
            format!("In your inventory, there are the {a} and the {b}.")
        }
        (RenderStyle::Generalization, []) => "Nothing is in your grasp.".to_string(),
        (RenderStyle::Generalization, [a]) => format!("The {a} is in your grasp."),
        (RenderStyle::Generalization, [a, b]) => {
            format!("The {a} and the {b} are in your grasp.")
        }
        (_, many) => unreachable!("inventory of {} objects", many.len()),
    }
}

pub fn render_state(state: &EnvState, style: RenderStyle) -> String {
    let mut out = if state.scene.is_empty() {
        "You see nothing.".to_string()
    } else {
        format!("You see {}.", the_list(&state.scene))
    };
    if let Some(obj) = state.stood_on() {
        let name = obj.display_name();
        match style {
            RenderStyle::Standard => out.push_str(&format!(" You are next to the {name}.")),
            RenderStyle::Generalization => out.push_str(&format!(" The {name} is next to you.")),
        }
    }
    out.push(' ');
    out.push_str(&inventory_sentence(&state.inventory, style));
    out
}

pub fn render_action(action: &Action) -> String {
    match action {
        Action::GoTo(name) => format!("You go to the {name}."),
        Action::Grasp => "You pick up the object.".to_string(),
        Action::Release(name) => format!("You give the {name}."),
        Action::ReleaseAll => "You give all the objects.".to_string(),
    }
}

/// The change sentence for a transition of type `ttype` that ended in `after`.
pub fn render_change(ttype: TransitionType, after: &EnvState, style: RenderStyle) -> String {
    let stood_on = || {
        after
            .stood_on()
            .map(|o| o.display_name())
            .expect("standing and grow transitions end on an object")
    };
    match ttype {
        TransitionType::Standing => match style {
            RenderStyle::Standard => format!("You are standing on the {}.", stood_on()),
            RenderStyle::Generalization => format!("The {} is beneath you.", stood_on()),
        },
        TransitionType::Holding1 | TransitionType::Holding2 => {
            inventory_sentence(&after.inventory, style)
        }
        TransitionType::GrowPlant
        | TransitionType::GrowSmallHerbivore
        | TransitionType::GrowBigHerbivore => match style {
            RenderStyle::Standard => format!("The objects transform into the {}.", stood_on()),
            RenderStyle::Generalization => {
                format!("The {} results from combining the objects.", stood_on())
            }
        },
    }
}
