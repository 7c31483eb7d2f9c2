//! Bundled model documents for the three reference systems and the
//! substituted ODE forms of the first two.

use crate::error::{Error, Result};
use crate::model::{parse_model, ModelSpec};

pub const FIXTURE_NAMES: [&str; 5] = ["test1", "test1-ode", "test2", "test2-ode", "test3"];

pub fn fixture_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "test1" => include_str!("../fixtures/test1.json"),
        "test1-ode" => include_str!("../fixtures/test1-ode.json"),
        "test2" => include_str!("../fixtures/test2.json"),
        "test2-ode" => include_str!("../fixtures/test2-ode.json"),
        "test3" => include_str!("../fixtures/test3.json"),
        _ => return None,
    })
}

pub fn load_fixture(name: &str) -> Result<ModelSpec> {
    let text = fixture_text(name).ok_or_else(|| {
        Error::InvalidModel(format!(
            "unknown fixture `{name}` (expected one of {})",
            FIXTURE_NAMES.join(", ")
        ))
    })?;
    parse_model(text)
}
