//! Named experiment setups.

use crate::config::{ConfigError, Experiment, ExperimentConfig};

pub struct Preset {
    pub name: &'static str,
    pub kind: Experiment,
    pub summary: &'static str,
    pub apply: fn(&mut ExperimentConfig),
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "dms-1d-a12",
        kind: Experiment::Solve1d,
        summary: "1D variable-coefficient problem with known solution, alpha = 1.2",
        apply: |c| c.alpha = vec![1.2],
    },
    Preset {
        name: "dms-1d-a18",
        kind: Experiment::Solve1d,
        summary: "1D variable-coefficient problem with known solution, alpha = 1.8",
        apply: |c| c.alpha = vec![1.8],
    },
    Preset {
        name: "bss-2d-const",
        kind: Experiment::Solve2d,
        summary: "2D benchmark, unit coefficients, alpha = (1.3, 1.7), dt = 1, 8 steps",
        apply: |c| bss(c, false),
    },
    Preset {
        name: "bss-2d-var",
        kind: Experiment::Solve2d,
        summary: "2D benchmark with variable coefficients, alpha = (1.3, 1.7), dt = 1, 8 steps",
        apply: |c| bss(c, true),
    },
];

fn bss(c: &mut ExperimentConfig, variable: bool) {
    c.alpha = vec![1.3, 1.7];
    c.dt = Some(1.0);
    c.steps = 8;
    c.solve_tol = 1e-6;
    c.variable = variable;
}

pub fn find_preset(name: &str) -> Result<&'static Preset, ConfigError> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ConfigError::UnknownPreset {
            name: name.to_string(),
            available: PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", "),
        })
}
