//! Configs shipped with the crate, also readable from `configs/`.

use super::config::RunConfig;
use crate::error::{CvError, Result};

pub const BUNDLED: &[(&str, &str)] = &[
    ("fig1_short", include_str!("../../configs/fig1_short.json")),
    ("fig1_long", include_str!("../../configs/fig1_long.json")),
    ("fig1_long_n4000", include_str!("../../configs/fig1_long_n4000.json")),
    ("fig1_literal", include_str!("../../configs/fig1_literal.json")),
    ("fig2_short", include_str!("../../configs/fig2_short.json")),
    ("fig2_long", include_str!("../../configs/fig2_long.json")),
    ("fig2_short_caption", include_str!("../../configs/fig2_short_caption.json")),
    ("fig2_long_caption", include_str!("../../configs/fig2_long_caption.json")),
    ("three_mode", include_str!("../../configs/three_mode.json")),
    ("empty", include_str!("../../configs/empty.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn get(name: &str) -> Result<RunConfig> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CvError::Config(format!("no bundled config named `{name}`")))?;
    RunConfig::from_json(text)
}

pub fn all() -> Result<Vec<RunConfig>> {
    names().map(get).collect()
}
