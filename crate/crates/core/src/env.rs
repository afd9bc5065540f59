use crate::abstraction::{project, AbstractSchema, AbstractState};
use crate::gridworld::{GroundState, WorldMap};

/// A world paired with the abstraction used to plan over it.
#[derive(Debug, Clone)]
pub struct Env {
    pub world: WorldMap,
    pub schema: AbstractSchema,
}

impl Env {
    pub fn new(world: WorldMap, schema: AbstractSchema) -> Env {
        Env { world, schema }
    }

    pub fn project(&self, s: &GroundState) -> AbstractState {
        project(s, &self.world, &self.schema)
    }
}
