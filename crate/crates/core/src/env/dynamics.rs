use super::{
    Action, Bucket, EnvConfig, EnvError, EnvState, ObjectClass, ObjectInstance, RenderStyle,
    TransitionRecord, TransitionType, INVENTORY_SLOTS,
};

/// Product of releasing `released` onto `target`, if the technology tree has a rule for it.
fn recipe_product(target: &ObjectInstance, released: &[ObjectInstance]) -> Option<ObjectInstance> {
    let needed = match target.bucket() {
        Bucket::Seed => [Bucket::Water].as_slice(),
        Bucket::BabySmallHerbivore => [Bucket::GrownPlant].as_slice(),
        Bucket::BabyBigHerbivore => [Bucket::GrownPlant, Bucket::GrownPlant].as_slice(),
        _ => return None,
    };
    let matches = released.len() == needed.len()
        && released.iter().zip(needed).all(|(o, b)| o.bucket() == *b);
    matches.then(|| target.grown_form())
}

fn graspable(obj: &ObjectInstance, config: &EnvConfig) -> bool {
    config.grasp_any || matches!(obj.bucket(), Bucket::Water | Bucket::GrownPlant)
}

/// All legal actions, in canonical order: moves by first occurrence in the scene,
/// then grasp, then single releases by inventory order, then release-all.
pub fn legal_actions(state: &EnvState, config: &EnvConfig) -> Vec<Action> {
    let mut actions = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    for (i, obj) in state.scene.iter().enumerate() {
        if Some(i) == state.standing_on {
            continue;
        }
        let name = obj.display_name();
        if !seen.contains(&name) {
            actions.push(Action::GoTo(name.clone()));
            seen.push(name);
        }
    }

    let Some(target) = state.stood_on() else {
        return actions;
    };
    if state.inventory.len() < INVENTORY_SLOTS && graspable(target, config) {
        actions.push(Action::Grasp);
    }
    let mut released: Vec<String> = Vec::new();
    for item in &state.inventory {
        let name = item.display_name();
        if !released.contains(&name) && recipe_product(target, std::slice::from_ref(item)).is_some()
        {
            actions.push(Action::Release(name.clone()));
            released.push(name);
        }
    }
    if state.inventory.len() == INVENTORY_SLOTS && recipe_product(target, &state.inventory).is_some()
    {
        actions.push(Action::ReleaseAll);
    }
    actions
}

fn illegal(action: &Action, reason: impl Into<String>) -> EnvError {
    EnvError::IllegalAction {
        action: format!("{action:?}"),
        reason: reason.into(),
    }
}

/// Applies `action` and returns the next state with its transition type.
/// Illegal actions are rejected, never silently ignored.
pub fn transition(
    state: &EnvState,
    action: &Action,
    config: &EnvConfig,
) -> Result<(EnvState, TransitionType), EnvError> {
    state.validate()?;
    let mut next = state.clone();
    next.step_count += 1;
    match action {
        Action::GoTo(name) => {
            let idx = state
                .resolve_name(name)
                .ok_or_else(|| illegal(action, "no such object to go to"))?;
            next.standing_on = Some(idx);
        }
        Action::Grasp => {
            let idx = state
                .standing_on
                .ok_or_else(|| illegal(action, "not standing on anything"))?;
            if state.inventory.len() >= INVENTORY_SLOTS {
                return Err(illegal(action, "inventory is full"));
            }
            if !graspable(&state.scene[idx], config) {
                return Err(illegal(action, "object cannot be grasped"));
            }
            let obj = next.scene.remove(idx);
            next.inventory.push(obj);
            next.standing_on = None;
        }
        Action::Release(item) => {
            let idx = state
                .standing_on
                .ok_or_else(|| illegal(action, "not standing on anything"))?;
            let slot = state
                .inventory
                .iter()
                .position(|o| &o.display_name() == item)
                .ok_or_else(|| illegal(action, "item not in inventory"))?;
            let product = recipe_product(&state.scene[idx], &state.inventory[slot..=slot])
                .ok_or_else(|| illegal(action, "release does not transform anything"))?;
            next.inventory.remove(slot);
            next.scene[idx] = product;
        }
        Action::ReleaseAll => {
            let idx = state
                .standing_on
                .ok_or_else(|| illegal(action, "not standing on anything"))?;
            if state.inventory.len() != INVENTORY_SLOTS {
                return Err(illegal(action, "release-all needs a full inventory"));
            }
            let product = recipe_product(&state.scene[idx], &state.inventory)
                .ok_or_else(|| illegal(action, "release does not transform anything"))?;
            next.inventory.clear();
            next.scene[idx] = product;
        }
    }
    let ttype = classify_transition(state, action, &next)?;
    Ok((next, ttype))
}

/// [`transition`] plus rendering into a [`TransitionRecord`].
pub fn step(
    state: &EnvState,
    action: &Action,
    config: &EnvConfig,
    style: RenderStyle,
) -> Result<(EnvState, TransitionRecord), EnvError> {
    let (next, ttype) = transition(state, action, config)?;
    let record = TransitionRecord::new(state.clone(), action.clone(), next.clone(), ttype, style);
    Ok((next, record))
}

pub fn classify_transition(
    before: &EnvState,
    action: &Action,
    after: &EnvState,
) -> Result<TransitionType, EnvError> {
    let unreachable = |why: &str| EnvError::Unclassifiable(format!("{action:?}: {why}"));
    match action {
        Action::GoTo(_) => Ok(TransitionType::Standing),
        Action::Grasp => match after.inventory.len() {
            1 => Ok(TransitionType::Holding1),
            2 => Ok(TransitionType::Holding2),
            n => Err(unreachable(&format!("inventory of {n} after grasp"))),
        },
        Action::Release(_) | Action::ReleaseAll => {
            let idx = before
                .standing_on
                .ok_or_else(|| unreachable("release without a target"))?;
            let product = after
                .scene
                .get(idx)
                .ok_or_else(|| unreachable("target vanished"))?;
            if product.is_young() || before.scene[idx].class() != product.class() {
                return Err(unreachable("target did not grow"));
            }
            match product.class() {
                ObjectClass::Plant => Ok(TransitionType::GrowPlant),
                ObjectClass::SmallHerbivore => Ok(TransitionType::GrowSmallHerbivore),
                ObjectClass::BigHerbivore => Ok(TransitionType::GrowBigHerbivore),
                ObjectClass::Water => Err(unreachable("water cannot grow")),
            }
        }
    }
}
