//! Named experiment designs. A preset is a list of `key=value` defaults that
//! a configuration expands before applying its own keys.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub keys: &'static [(&'static str, &'static str)],
    /// Emit the sharp-interface ODE twin alongside a run.
    pub oracle: bool,
    /// Meta-preset: `(ε, n)` legs run on top of the preset named by `base`.
    pub legs: &'static [(f64, usize)],
}

impl Preset {
    pub fn is_sweep(&self) -> bool {
        !self.legs.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&'static str> {
        self.keys.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

const CATALOG: &[Preset] = &[
    Preset {
        name: "single_ball",
        summary: "one circle r=0.3, no obstacles (stationarity)",
        keys: &[
            ("d", "2"),
            ("n", "256"),
            ("epsilon", "0.04"),
            ("alpha", "0.5"),
            ("scheme", "imex"),
            ("dt_safety", "0.2"),
            ("t_end", "0.01"),
            ("snapshot_every", "25"),
            ("initial", "balls:0.5,0.5,0.3"),
            ("saturation", "0.35"),
        ],
        oracle: true,
        legs: &[],
    },
    Preset {
        name: "two_balls",
        summary: "circles r=0.12 and r=0.2, no obstacles (coarsening against the ODE)",
        keys: &[
            ("d", "2"),
            ("n", "256"),
            ("epsilon", "0.02"),
            ("alpha", "0.5"),
            ("scheme", "imex"),
            ("dt_safety", "0.2"),
            ("t_end", "0.01"),
            ("snapshot_every", "50"),
            ("initial", "balls:0.3,0.5,0.12;0.75,0.5,0.2"),
            ("saturation", "0.1"),
        ],
        oracle: true,
        legs: &[],
    },
    Preset {
        name: "pinned_inner",
        summary: "circle r=0.28 around an O+ ball r=0.15 plus a free circle (pinning, non-intrusion)",
        keys: &[
            ("d", "2"),
            ("n", "256"),
            ("epsilon", "0.02"),
            ("alpha", "0.5"),
            ("scheme", "imex"),
            ("dt_safety", "0.2"),
            ("t_end", "0.05"),
            ("snapshot_every", "250"),
            ("initial", "balls:0.3,0.3,0.28;0.8,0.8,0.3"),
            ("obstacle_plus", "0.3,0.3,0.15"),
            ("obstacle_r0", "0.15"),
            ("saturation", "0.1"),
        ],
        oracle: true,
        legs: &[],
    },
    Preset {
        name: "outer_obstacle",
        summary: "circle r=0.25 next to an O- ball r=0.335 (exclusion, certified barrier)",
        keys: &[
            ("d", "2"),
            ("n", "512"),
            ("epsilon", "0.012"),
            ("alpha", "0.5"),
            ("scheme", "imex"),
            ("dt_safety", "0.2"),
            ("t_end", "0.005"),
            ("snapshot_every", "200"),
            ("initial", "balls:0,0,0.25"),
            ("obstacle_minus", "0.5,0.5,0.335"),
            ("obstacle_r0", "0.111"),
            ("saturation", "0.21"),
        ],
        oracle: false,
        legs: &[],
    },
    Preset {
        name: "epsilon_sweep",
        summary: "single_ball at (eps, n) = (0.08, 128), (0.04, 256), (0.02, 512)",
        keys: &[("base", "single_ball"), ("t_end", "0.01")],
        oracle: false,
        legs: &[(0.08, 128), (0.04, 256), (0.02, 512)],
    },
];

pub fn catalog() -> &'static [Preset] {
    CATALOG
}

pub fn find(name: &str) -> Result<&'static Preset> {
    CATALOG.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = CATALOG.iter().map(|p| p.name).collect();
        Error::key("preset", format!("unknown preset `{name}`; available: {}", names.join(", ")))
    })
}
