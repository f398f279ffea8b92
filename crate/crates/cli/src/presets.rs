//! Bundled parameter sets, one per simulated figure column.

use crate::error::{CliError, CliResult};

const PRESETS: [(&str, &str); 5] = [
    ("fe1-fig1a", include_str!("../presets/fe1-fig1a.toml")),
    ("fe5-afm-fig2d", include_str!("../presets/fe5-afm-fig2d.toml")),
    ("fe5-afm-fig2e", include_str!("../presets/fe5-afm-fig2e.toml")),
    ("fe6-afm-fig3a", include_str!("../presets/fe6-afm-fig3a.toml")),
    ("fe5-fm-fig3b", include_str!("../presets/fe5-fm-fig3b.toml")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// TOML text of a preset.
pub fn source(name: &str) -> CliResult<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| CliError::config(format!("unknown preset '{name}' (known: {})", names().join(", "))))
}
