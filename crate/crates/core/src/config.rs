//! Line-oriented `key=value` run configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::dynamics::Scheme;
use crate::fields::TorusGrid;
use crate::initial::InitialSpec;
use crate::multiplier::check_alpha;
use crate::obstacles::{parse_balls, render_balls, ObstacleSet};
use crate::presets;
use crate::{Error, Result};

/// Keys accepted by [`parse_config`].
pub const KEYS: &[&str] = &[
    "d",
    "n",
    "epsilon",
    "alpha",
    "scheme",
    "dt_safety",
    "t_end",
    "snapshot_every",
    "preset",
    "initial",
    "obstacle_plus",
    "obstacle_minus",
    "obstacle_r0",
    "saturation",
    "output_dir",
    "density_ratio_every",
    "seed",
];

/// `tanh(x)` rounds to `1.0` in `f64` beyond `x ≈ 19`; the saturated far
/// field must stay strictly inside the wells.
pub const MAX_SATURATION_RATIO: f64 = 18.0;

const DEFAULTS: &[(&str, &str)] = &[
    ("d", "2"),
    ("n", "256"),
    ("epsilon", "0.04"),
    ("alpha", "0.5"),
    ("scheme", "imex"),
    ("dt_safety", "0.2"),
    ("t_end", "0.01"),
    ("snapshot_every", "100"),
    ("obstacle_plus", ""),
    ("obstacle_minus", ""),
    ("saturation", "0.1"),
    ("output_dir", "out"),
    ("density_ratio_every", "50"),
    ("seed", "12345"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub d: usize,
    pub n: usize,
    pub eps: f64,
    pub alpha: f64,
    pub scheme: Scheme,
    pub dt_safety: f64,
    pub t_end: f64,
    pub snapshot_every: u64,
    pub preset: Option<String>,
    pub initial: InitialSpec<f64>,
    pub obstacles: ObstacleSet<f64>,
    pub output_dir: PathBuf,
    /// Sample the density ratio every this many steps (0: initial and final only).
    pub density_ratio_every: u64,
    /// Seed of the density-ratio center sample.
    pub seed: u64,
}

/// Splits text into `(line, key, value)` triples, dropping comments and blank lines.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: no + 1,
            reason: format!("expected key=value, got `{line}`"),
        })?;
        out.push((no + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Collects pairs into a map, rejecting duplicates and keys outside `allowed`.
pub fn collect_keys(pairs: Vec<(usize, String, String)>, allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (line, k, v) in pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Parse {
                line,
                reason: format!("unknown key `{k}`"),
            });
        }
        if map.insert(k.clone(), v).is_some() {
            return Err(Error::Parse {
                line,
                reason: format!("duplicate key `{k}`"),
            });
        }
    }
    Ok(map)
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    let explicit = collect_keys(parse_pairs(text)?, KEYS)?;
    from_keys(&explicit)
}

/// Expands defaults and the preset (if any), overlays `explicit`, and validates.
pub fn from_keys(explicit: &BTreeMap<String, String>) -> Result<SimConfig> {
    let mut map: BTreeMap<String, String> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    if let Some(name) = explicit.get("preset") {
        let preset = presets::find(name)?;
        if preset.is_sweep() {
            return Err(Error::key(
                "preset",
                format!("`{name}` is a sweep meta-preset; run it with the sweep verb"),
            ));
        }
        for (k, v) in preset.keys {
            map.insert(k.to_string(), v.to_string());
        }
    }
    for (k, v) in explicit {
        map.insert(k.clone(), v.clone());
    }
    build(&map)
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map.get(key).ok_or_else(|| Error::key(key, "missing"))?;
    raw.parse::<T>()
        .map_err(|_| Error::key(key, format!("malformed number `{raw}`")))
}

fn real(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v: f64 = num(map, key)?;
    if !v.is_finite() {
        return Err(Error::key(key, "must be finite"));
    }
    Ok(v)
}

fn build(map: &BTreeMap<String, String>) -> Result<SimConfig> {
    let d: usize = num(map, "d")?;
    let n: usize = num(map, "n")?;
    let grid = TorusGrid::new(d, n).map_err(|e| Error::key(if d == 2 || d == 3 { "n" } else { "d" }, e.to_string()))?;
    let h = 1.0 / n as f64;

    let eps = real(map, "epsilon")?;
    if !(eps >= 4.0 * h) {
        return Err(Error::key("epsilon", format!("eps = {eps} < 4h = {}: interface not resolved", 4.0 * h)));
    }
    if !(eps < 0.25) {
        return Err(Error::key("epsilon", format!("eps = {eps} must be below 1/4")));
    }
    let alpha = real(map, "alpha")?;
    check_alpha(alpha)?;
    let scheme: Scheme = map["scheme"].parse()?;
    let dt_safety = real(map, "dt_safety")?;
    if !(dt_safety > 0.0 && dt_safety <= 1.0) {
        return Err(Error::key("dt_safety", format!("must lie in (0,1], got {dt_safety}")));
    }
    let t_end = real(map, "t_end")?;
    if !(t_end >= 0.0) {
        return Err(Error::key("t_end", format!("must be nonnegative, got {t_end}")));
    }
    let snapshot_every: u64 = num(map, "snapshot_every")?;
    let density_ratio_every: u64 = num(map, "density_ratio_every")?;
    let seed: u64 = num(map, "seed")?;

    let saturation = real(map, "saturation")?;
    if !(saturation > 0.0) {
        return Err(Error::key("saturation", format!("must be positive, got {saturation}")));
    }
    if saturation / eps > MAX_SATURATION_RATIO {
        return Err(Error::key(
            "saturation",
            format!(
                "L/eps = {} exceeds {MAX_SATURATION_RATIO}: tanh(L/eps) would round to 1",
                saturation / eps
            ),
        ));
    }
    let initial_text = map.get("initial").ok_or_else(|| Error::key("initial", "missing"))?;
    let initial = InitialSpec::parse(initial_text, d, saturation)?;
    if initial.balls.iter().any(|b| b.dim() != d) {
        return Err(Error::key("initial", format!("balls must have {d} coordinates")));
    }

    let r0 = match map.get("obstacle_r0") {
        Some(_) => Some(real(map, "obstacle_r0")?),
        None => None,
    };
    let plus = parse_balls(&map["obstacle_plus"], d).map_err(|e| Error::key("obstacle_plus", e.to_string()))?;
    let minus = parse_balls(&map["obstacle_minus"], d).map_err(|e| Error::key("obstacle_minus", e.to_string()))?;
    let obstacles = ObstacleSet::new(plus, minus, r0)?;
    if !obstacles.is_empty() && !(eps.sqrt() < obstacles.r0) {
        return Err(Error::key(
            "epsilon",
            format!("collar width sqrt(eps) = {} does not fit inside R0 = {}", eps.sqrt(), obstacles.r0),
        ));
    }
    initial.check_against(&obstacles, &grid)?;

    Ok(SimConfig {
        d,
        n,
        eps,
        alpha,
        scheme,
        dt_safety,
        t_end,
        snapshot_every,
        preset: map.get("preset").cloned(),
        initial,
        obstacles,
        output_dir: PathBuf::from(map.get("output_dir").map(String::as_str).unwrap_or("out")),
        density_ratio_every,
        seed,
    })
}

impl SimConfig {
    pub fn grid(&self) -> TorusGrid {
        TorusGrid::new(self.d, self.n).expect("validated grid")
    }

    /// Every key, in [`KEYS`] order. Parsing the result yields `self` again.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("d", self.d.to_string());
        put("n", self.n.to_string());
        put("epsilon", self.eps.to_string());
        put("alpha", self.alpha.to_string());
        put("scheme", self.scheme.to_string());
        put("dt_safety", self.dt_safety.to_string());
        put("t_end", self.t_end.to_string());
        put("snapshot_every", self.snapshot_every.to_string());
        if let Some(p) = &self.preset {
            put("preset", p.clone());
        }
        put("initial", self.initial.render());
        put("obstacle_plus", render_balls(&self.obstacles.plus));
        put("obstacle_minus", render_balls(&self.obstacles.minus));
        if !self.obstacles.is_empty() {
            put("obstacle_r0", self.obstacles.r0.to_string());
        }
        put("saturation", self.initial.saturation.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("density_ratio_every", self.density_ratio_every.to_string());
        put("seed", self.seed.to_string());
        out
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        self.initial.warnings(self.eps)
    }
}

/// A sweep: one run per `(ε, n)` leg on top of shared keys.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub base: BTreeMap<String, String>,
    pub legs: Vec<(f64, usize)>,
    pub output_dir: PathBuf,
}

/// Keys of a sweep meta-config besides the run keys.
pub const SWEEP_KEYS: &[&str] = &["base", "legs"];

/// Parses a meta-config. `preset=<meta-preset>` or `base=<preset>` with
/// `legs=eps:n,eps:n,...`; any run key is applied to every leg.
pub fn parse_sweep(text: &str) -> Result<SweepConfig> {
    let allowed: Vec<&str> = KEYS.iter().chain(SWEEP_KEYS).copied().collect();
    let explicit = collect_keys(parse_pairs(text)?, &allowed)?;
    let mut map = BTreeMap::new();
    let mut legs = Vec::new();
    if let Some(name) = explicit.get("preset") {
        let p = presets::find(name)?;
        if !p.is_sweep() {
            return Err(Error::key("preset", format!("`{name}` is not a sweep meta-preset")));
        }
        for (k, v) in p.keys {
            map.insert(k.to_string(), v.to_string());
        }
        legs = p.legs.to_vec();
    }
    for (k, v) in &explicit {
        if k != "preset" {
            map.insert(k.clone(), v.clone());
        }
    }
    if let Some(text) = map.remove("legs") {
        legs = parse_legs(&text)?;
    }
    if legs.is_empty() {
        return Err(Error::key("legs", "a sweep needs at least one eps:n leg"));
    }
    if let Some(base) = map.remove("base") {
        map.insert("preset".into(), base);
    }
    let output_dir = PathBuf::from(map.remove("output_dir").unwrap_or_else(|| "out".into()));
    let sweep = SweepConfig {
        base: map,
        legs,
        output_dir,
    };
    for i in 0..sweep.legs.len() {
        sweep.leg(i)?;
    }
    Ok(sweep)
}

fn parse_legs(text: &str) -> Result<Vec<(f64, usize)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let bad = || Error::key("legs", format!("malformed leg `{item}`, expected eps:n"));
            let (e, n) = item.split_once(':').ok_or_else(bad)?;
            Ok((e.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

impl SweepConfig {
    pub fn leg(&self, i: usize) -> Result<SimConfig> {
        let (eps, n) = self.legs[i];
        let mut keys = self.base.clone();
        keys.insert("epsilon".into(), eps.to_string());
        keys.insert("n".into(), n.to_string());
        keys.insert(
            "output_dir".into(),
            self.output_dir.join(format!("eps_{eps}_n_{n}")).display().to_string(),
        );
        from_keys(&keys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_override() {
        let cfg = parse_config("preset=single_ball\nepsilon=0.05 # wider\n").unwrap();
        assert_eq!(cfg.eps, 0.05);
        assert_eq!(cfg.n, 256);
        assert_eq!(cfg.initial.balls[0].radius, 0.3);
        assert_eq!(cfg.preset.as_deref(), Some("single_ball"));
    }

    #[test]
    fn rejections_name_the_key() {
        let err = parse_config("preset=single_ball\nalpha=1.0").unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
        let err = parse_config("preset=single_ball\nn=64\nepsilon=0.04").unwrap_err();
        assert!(err.to_string().contains("epsilon") && err.to_string().contains("4h"), "{err}");
        assert!(parse_config("preset=single_ball\nfoo=1").is_err());
        assert!(parse_config("preset=single_ball\nepsilon=abc").is_err());
        assert!(parse_config("preset=single_ball\nepsilon=0.04\nepsilon=0.05").is_err());
        assert!(parse_config("preset=epsilon_sweep").is_err());
        assert!(parse_config("epsilon=0.04").is_err());
        assert!(parse_config("preset=nope").unwrap_err().to_string().contains("two_balls"));
        // collar does not fit
        let err = parse_config("preset=pinned_inner\nepsilon=0.03").unwrap_err();
        assert!(err.to_string().contains("collar"), "{err}");
        let err = parse_config("preset=single_ball\nsaturation=1.0").unwrap_err();
        assert!(err.to_string().contains("saturation"), "{err}");
    }

    #[test]
    fn render_round_trip_for_every_preset() {
        for p in presets::catalog().iter().filter(|p| !p.is_sweep()) {
            let cfg = parse_config(&format!("preset={}", p.name)).unwrap();
            assert_eq!(parse_config(&cfg.render()).unwrap(), cfg, "{}", p.name);
        }
    }

    #[test]
    fn sweep_expansion() {
        let s = parse_sweep("preset=epsilon_sweep\noutput_dir=/tmp/x").unwrap();
        assert_eq!(s.legs.len(), 3);
        let leg = s.leg(2).unwrap();
        assert_eq!((leg.eps, leg.n), (0.02, 512));
        assert_eq!(leg.initial.balls[0].radius, 0.3);
        assert!(leg.output_dir.starts_with("/tmp/x"));
        let custom = parse_sweep("base=two_balls\nlegs=0.04:256, 0.02:256\nt_end=0.001").unwrap();
        assert_eq!(custom.leg(0).unwrap().t_end, 0.001);
        assert!(parse_sweep("base=two_balls").is_err());
        assert!(parse_sweep("base=two_balls\nlegs=0.04:64").is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn render_round_trips(eps in 0.02..0.2f64, alpha in 0.05..0.95f64, seed in proptest::prelude::any::<u32>()) {
            let text = format!("preset=single_ball\nn=256\nepsilon={eps}\nalpha={alpha}\nseed={seed}\nt_end=0.001");
            let cfg = parse_config(&text).unwrap();
            proptest::prop_assert_eq!(parse_config(&cfg.render()).unwrap(), cfg);
        }
    }
}
