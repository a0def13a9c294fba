//! Inverse of the renderer: recover structure from observation text.
//!
//! The synthetic scorer reads prompts the same way a language model would, from
//! text only, so it needs these parsers. Both render styles are accepted.

use super::{Action, EnvError, EnvState, ObjectClass, ObjectInstance, TransitionType};

fn parse_err(text: &str, reason: &str) -> EnvError {
    EnvError::Parse {
        text: text.to_string(),
        reason: reason.to_string(),
    }
}

fn object(name: &str, text: &str) -> Result<ObjectInstance, EnvError> {
    ObjectInstance::from_display_name(name).ok_or_else(|| parse_err(text, "unknown object name"))
}

fn the_object(phrase: &str, text: &str) -> Result<ObjectInstance, EnvError> {
    let name = phrase
        .trim()
        .strip_prefix("the ")
        .ok_or_else(|| parse_err(text, "expected `the <object>`"))?;
    object(name, text)
}

fn sentences(text: &str) -> Vec<&str> {
    text.split('.')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_inventory(sentence: &str, text: &str) -> Result<Option<Vec<ObjectInstance>>, EnvError> {
    if sentence == "In your inventory, there is nothing" || sentence == "Nothing is in your grasp" {
        return Ok(Some(Vec::new()));
    }
    if let Some(rest) = sentence.strip_prefix("In your inventory, there is ") {
        return Ok(Some(vec![the_object(rest, text)?]));
    }
    if let Some(rest) = sentence.strip_prefix("In your inventory, there are ") {
        let (a, b) = rest
            .split_once(" and ")
            .ok_or_else(|| parse_err(text, "expected two inventory items"))?;
        return Ok(Some(vec![the_object(a, text)?, the_object(b, text)?]));
    }
    if let Some(rest) = sentence
        .strip_prefix("The ")
        .and_then(|r| r.strip_suffix(" are in your grasp"))
    {
        let (a, b) = rest
            .split_once(" and ")
            .ok_or_else(|| parse_err(text, "expected two inventory items"))?;
        return Ok(Some(vec![object(a, text)?, the_object(b, text)?]));
    }
    if let Some(name) = sentence
        .strip_prefix("The ")
        .and_then(|r| r.strip_suffix(" is in your grasp"))
    {
        return Ok(Some(vec![object(name, text)?]));
    }
    Ok(None)
}

/// Reconstructs a state from its rendering. With duplicate names the agent is
/// placed on the first matching object, which is observationally equivalent.
pub fn parse_state(text: &str) -> Result<EnvState, EnvError> {
    let parts = sentences(text);
    let mut iter = parts.into_iter();
    let first = iter.next().ok_or_else(|| parse_err(text, "empty state"))?;
    let listing = first
        .strip_prefix("You see ")
        .ok_or_else(|| parse_err(text, "state must start with `You see`"))?;
    let scene = if listing == "nothing" {
        Vec::new()
    } else {
        listing
            .split(", ")
            .map(|p| the_object(p, text))
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut state = EnvState::new(scene);

    let mut inventory = None;
    for sentence in iter {
        let next_to = sentence
            .strip_prefix("You are next to the ")
            .or_else(|| {
                sentence
                    .strip_prefix("The ")
                    .and_then(|r| r.strip_suffix(" is next to you"))
            });
        if let Some(name) = next_to {
            let idx = state
                .scene
                .iter()
                .position(|o| o.display_name() == name)
                .ok_or_else(|| parse_err(text, "standing on an object not in the scene"))?;
            state.standing_on = Some(idx);
        } else if let Some(items) = parse_inventory(sentence, text)? {
            inventory = Some(items);
        } else {
            return Err(parse_err(text, "unrecognised sentence"));
        }
    }
    state.inventory = inventory.ok_or_else(|| parse_err(text, "missing inventory sentence"))?;
    Ok(state)
}

pub fn parse_action(text: &str) -> Result<Action, EnvError> {
    let text = text.trim();
    match text {
        "You pick up the object." => return Ok(Action::Grasp),
        "You give all the objects." => return Ok(Action::ReleaseAll),
        _ => {}
    }
    let body = text
        .strip_suffix('.')
        .ok_or_else(|| parse_err(text, "action must end with a period"))?;
    if let Some(name) = body.strip_prefix("You go to the ") {
        object(name, text)?;
        return Ok(Action::GoTo(name.to_string()));
    }
    if let Some(name) = body.strip_prefix("You give the ") {
        object(name, text)?;
        return Ok(Action::Release(name.to_string()));
    }
    Err(parse_err(text, "unrecognised action"))
}

/// Transition type implied by a change sentence, in either style.
pub fn classify_change_text(text: &str) -> Option<TransitionType> {
    let body = text.trim().strip_suffix('.')?;
    let grow = |name: &str| {
        let obj = ObjectInstance::from_display_name(name)?;
        if obj.is_young() {
            return None;
        }
        match obj.class() {
            ObjectClass::Plant => Some(TransitionType::GrowPlant),
            ObjectClass::SmallHerbivore => Some(TransitionType::GrowSmallHerbivore),
            ObjectClass::BigHerbivore => Some(TransitionType::GrowBigHerbivore),
            ObjectClass::Water => None,
        }
    };
    let known = |name: &str| ObjectInstance::from_display_name(name).is_some();

    if let Some(name) = body.strip_prefix("You are standing on the ") {
        return known(name).then_some(TransitionType::Standing);
    }
    if let Some(name) = body.strip_prefix("The objects transform into the ") {
        return grow(name);
    }
    if let Some(name) = body.strip_prefix("In your inventory, there is the ") {
        return known(name).then_some(TransitionType::Holding1);
    }
    if body.starts_with("In your inventory, there are the ") {
        return parse_inventory(body, text)
            .ok()
            .flatten()
            .map(|_| TransitionType::Holding2);
    }
    let rest = body.strip_prefix("The ")?;
    if let Some(name) = rest.strip_suffix(" is beneath you") {
        return known(name).then_some(TransitionType::Standing);
    }
    if let Some(name) = rest.strip_suffix(" results from combining the objects") {
        return grow(name);
    }
    if rest.ends_with(" are in your grasp") {
        return parse_inventory(body, text)
            .ok()
            .flatten()
            .map(|_| TransitionType::Holding2);
    }
    if let Some(name) = rest.strip_suffix(" is in your grasp") {
        return known(name).then_some(TransitionType::Holding1);
    }
    None
}
