//! Protocol documents shipped with the library, by name.

use crate::error::{Error, Result};
use crate::protocol::config::ConfigDocument;

pub const CONFIGS: &[(&str, &str)] = &[
    ("single-classical", include_str!("../configs/single-classical.json")),
    ("single-quantum", include_str!("../configs/single-quantum.json")),
    ("double-classical-kdt1", include_str!("../configs/double-classical-kdt1.json")),
    ("double-quantum-kdt1", include_str!("../configs/double-quantum-kdt1.json")),
    ("double-classical-kdt0.2", include_str!("../configs/double-classical-kdt0.2.json")),
    ("double-quantum-kdt0.2", include_str!("../configs/double-quantum-kdt0.2.json")),
    ("driven-monitored", include_str!("../configs/driven-monitored.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    CONFIGS.iter().map(|(n, _)| *n)
}

pub fn document(name: &str) -> Result<ConfigDocument> {
    let (_, text) = CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config("--config", format!("no bundled config `{name}` (have: {})", names().collect::<Vec<_>>().join(", "))))?;
    ConfigDocument::parse(text).map_err(|e| match e {
        Error::Config { location, message } => Error::config(format!("{name}: {location}"), message),
        other => other,
    })
}
