//! Scenario and sweep files shipped in the repository's `presets/`
//! directory, embedded at build time.

/// A named experiment: a runnable scenario and, for parameter studies, the
/// sweep built on top of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub scenario: &'static str,
    pub sweep: Option<&'static str>,
}

/// Whether a preset lookup asked for the scenario or the sweep file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Scenario,
    Sweep,
}

macro_rules! preset {
    ($name:literal) => {
        Preset {
            name: $name,
            scenario: include_str!(concat!("../../../../presets/", $name, ".toml")),
            sweep: None,
        }
    };
    ($name:literal, sweep) => {
        Preset {
            name: $name,
            scenario: include_str!(concat!("../../../../presets/", $name, ".toml")),
            sweep: Some(include_str!(concat!("../../../../presets/sweeps/", $name, ".toml"))),
        }
    };
}

const PRESETS: &[Preset] = &[
    preset!("fig12-convergence"),
    preset!("fig15-multi-job"),
    preset!("fig3-triangle"),
    preset!("fig17-f-functions", sweep),
    preset!("fig18-heatmap", sweep),
    preset!("fig16-stragglers", sweep),
    preset!("fig16b-compatibility", sweep),
    preset!("fig19-wi-vs-md", sweep),
];

pub fn presets() -> &'static [Preset] {
    PRESETS
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

impl Preset {
    /// First line of the scenario's leading comment block.
    pub fn description(&self) -> &'static str {
        self.scenario
            .lines()
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .map(str::trim)
            .unwrap_or("")
    }

    pub fn text(&self, kind: PresetKind) -> Option<&'static str> {
        match kind {
            PresetKind::Scenario => Some(self.scenario),
            PresetKind::Sweep => self.sweep,
        }
    }
}
