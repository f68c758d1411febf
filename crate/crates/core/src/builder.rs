//! Handle-style declarations on a live [`Interface`]:
//!
//! ```
//! use beestar_core::{Code, Interface};
//!
//! let app = Interface::in_memory();
//! let prompt = app.entity("prompt").unwrap();
//! let input = app.input_entity("CLIPInputEntity").unwrap();
//! input.sets("word", &[&prompt]).unwrap();
//! let agt = app.agent_entity("CLIPAgent", Code::builtin("uppercase")).unwrap();
//! agt.watch("word", &[&prompt]).unwrap();
//! assert_eq!(app.watchers_of("prompt", "word").unwrap(), vec!["CLIPAgent"]);
//! ```

use crate::error::GraphError;
use crate::graph::{EdgeId, PropertyDecl};
use crate::kind::{props, AGENT_ENTITY, BUTTON_ENTITY, ENTITY, INPUT_ENTITY};
use crate::propagation::Interface;
use crate::value::{Code, Value, ValueType};

#[derive(Clone, Copy)]
pub struct EntityRef<'a> {
    app: &'a Interface,
    name: &'a str,
}

impl<'a> EntityRef<'a> {
    pub fn name(&self) -> &str {
        self.name
    }

    pub fn sets(&self, prop: &str, entities: &[&EntityRef<'_>]) -> Result<Vec<EdgeId>, GraphError> {
        let targets: Vec<&str> = entities.iter().map(|e| e.name).collect();
        self.app.sets(self.name, prop, &targets)
    }

    pub fn watch(&self, prop: &str, entities: &[&EntityRef<'_>]) -> Result<Vec<EdgeId>, GraphError> {
        let targets: Vec<&str> = entities.iter().map(|e| e.name).collect();
        self.app.watch(self.name, prop, &targets)
    }
}

impl Interface {
    pub fn declare<'a>(
        &'a self,
        name: &'a str,
        kind: &str,
        props: Vec<PropertyDecl>,
    ) -> Result<EntityRef<'a>, GraphError> {
        self.create_entity(name, kind, props)?;
        Ok(EntityRef { app: self, name })
    }

    pub fn entity<'a>(&'a self, name: &'a str) -> Result<EntityRef<'a>, GraphError> {
        self.declare(name, ENTITY, vec![])
    }

    pub fn input_entity<'a>(&'a self, name: &'a str) -> Result<EntityRef<'a>, GraphError> {
        self.declare(name, INPUT_ENTITY, vec![])
    }

    pub fn button_entity<'a>(&'a self, name: &'a str, message: &str) -> Result<EntityRef<'a>, GraphError> {
        self.declare(
            name,
            BUTTON_ENTITY,
            vec![PropertyDecl::new(props::MESSAGE, ValueType::String, message)],
        )
    }

    pub fn agent_entity<'a>(&'a self, name: &'a str, func: Code) -> Result<EntityRef<'a>, GraphError> {
        self.declare(
            name,
            AGENT_ENTITY,
            vec![PropertyDecl::new(props::SOURCE_CODE, ValueType::Code, Value::Code(func))],
        )
    }

    /// Handle to an entity that already exists.
    pub fn entity_ref<'a>(&'a self, name: &'a str) -> Result<EntityRef<'a>, GraphError> {
        self.read(|g| g.resolve(name))?;
        Ok(EntityRef { app: self, name })
    }
}
