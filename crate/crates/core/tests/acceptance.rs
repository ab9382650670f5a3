//! Acceptance suite. Runs every criterion concurrently, prints one
//! `criterion N [PRIMARY] ...: PASS|FAIL (...)` line each in order, and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use vpmcf::config::{parse_config, parse_sweep, SimConfig};
use vpmcf::diagnostics::{interface_radius, intrusion_report, DiagnosticsRecord, Intrusion};
use vpmcf::dynamics::{Observer, Simulation};
use vpmcf::oracle::{default_dt, integrate_oracle, BallConfig, Trajectory};
use vpmcf::output::emit_run;
use vpmcf::Result;

const RUN_PRESETS: [&str; 4] = ["single_ball", "two_balls", "pinned_inner", "outer_obstacle"];

struct Track {
    cfg: SimConfig,
    dt: f64,
    h: f64,
    records: Vec<DiagnosticsRecord<f64>>,
    /// Extracted radius per initial ball (0 once the ball is gone), per record.
    radii: Vec<Vec<f64>>,
    intrusion: Vec<Intrusion<f64>>,
    energy0: f64,
    well_prepared: bool,
    elapsed: Duration,
}

impl Observer<f64> for Track {
    fn record(&mut self, sim: &Simulation<f64>, rec: &DiagnosticsRecord<f64>) -> Result<()> {
        let phi = &sim.state().phi;
        let radii = sim
            .initial_spec()
            .balls
            .iter()
            .map(|b| interface_radius(phi, &b.center).map_or(0.0, |r| r.radius))
            .collect();
        self.radii.push(radii);
        self.intrusion.push(intrusion_report(phi, sim.template())?);
        self.records.push(rec.clone());
        Ok(())
    }
}

fn track(cfg: SimConfig) -> Track {
    let start = Instant::now();
    let mut sim = Simulation::<f64>::new(&cfg).unwrap_or_else(|e| panic!("{:?}: {e}", cfg.preset));
    let report = *sim.well_prepared().expect("validated");
    let mut t = Track {
        dt: sim.dt(),
        h: sim.grid().h::<f64>(),
        cfg,
        records: Vec::new(),
        radii: Vec::new(),
        intrusion: Vec::new(),
        energy0: report.energy0,
        well_prepared: report.passes(),
        elapsed: Duration::ZERO,
    };
    sim.run_with(&mut t).unwrap_or_else(|e| panic!("{:?}: {e}", t.cfg.preset));
    t.elapsed = start.elapsed();
    t
}

fn preset_cfg(name: &str, extra: &str) -> SimConfig {
    parse_config(&format!("preset={name}\n{extra}")).unwrap()
}

fn preset_run(name: &str) -> &'static Track {
    static CELLS: [OnceLock<Track>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let i = RUN_PRESETS.iter().position(|p| *p == name).expect("run preset");
    CELLS[i].get_or_init(|| track(preset_cfg(name, "")))
}

fn sweep_legs() -> Vec<SimConfig> {
    let sweep = parse_sweep("preset=epsilon_sweep").unwrap();
    (0..sweep.legs.len()).map(|i| sweep.leg(i).unwrap()).collect()
}

fn sweep() -> &'static Vec<Track> {
    static CELL: OnceLock<Vec<Track>> = OnceLock::new();
    CELL.get_or_init(|| sweep_legs().into_iter().map(track).collect())
}

fn oracle_for(t: &Track) -> Trajectory<f64> {
    let balls = BallConfig::<f64>::from_config(&t.cfg).unwrap();
    integrate_oracle(&balls, t.cfg.d, t.cfg.t_end, default_dt(&balls)).unwrap()
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

struct Verdict {
    n: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(n: u32, name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { n, name, pass, detail }
}

fn sup<F: Fn(&DiagnosticsRecord<f64>) -> f64>(t: &Track, f: F) -> f64 {
    t.records.iter().map(f).fold(f64::MIN, f64::max)
}

fn criterion_01_maximum_principle() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in RUN_PRESETS {
        let t = preset_run(name);
        let m = sup(t, |r| r.max_abs_phi);
        let ok = m < 1.0 && t.elapsed < Duration::from_secs(300) && t.records.len() as u64 == t.records.last().unwrap().step + 1;
        pass &= ok;
        detail.push(format!("{name}: max|phi| = {m:.15}, {:.1}s", t.elapsed.as_secs_f64()));
    }
    verdict(1, "maximum principle", pass, detail.join("; "))
}

/// Residual statistics over a fixed horizon at safety factor `s`.
fn residual_run(preset: &str, s: f64, t_end: f64) -> (f64, f64, f64, f64) {
    let cfg = preset_cfg(preset, &format!("t_end={t_end}\ndt_safety={s}\ndensity_ratio_every=0"));
    let t = track(cfg);
    let res: Vec<f64> = t.records.iter().skip(1).map(|r| r.dissipation_residual).collect();
    let sum: f64 = res.iter().map(|r| r.abs()).sum();
    let c = res.iter().map(|r| r.abs()).fold(0.0, f64::max) / (t.dt * t.dt);
    // the Lyapunov quantity may rise by at most the step's residual
    let excess = t
        .records
        .windows(2)
        .map(|w| (w[1].lyapunov - w[0].lyapunov) - w[1].dissipation_residual.max(0.0))
        .fold(f64::MIN, f64::max);
    (sum, c, excess, t.dt)
}

fn criterion_02_energy_dissipation() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for (preset, t_end) in [("single_ball", 0.002), ("pinned_inner", 0.0016)] {
        let (s1, c1, x1, dt1) = residual_run(preset, 0.2, t_end);
        let (s2, c2, x2, _) = residual_run(preset, 0.1, t_end);
        let ratio = s1 / s2;
        let c_stable = c2 <= 2.0 * c1 && c1 <= 2.0 * c2;
        let lyap_ok = x1 <= 1e-12 && x2 <= 1e-12;
        pass &= ratio >= 3.0 && c_stable && lyap_ok;
        detail.push(format!(
            "{preset}: dt = {dt1:.2e}, C = {c1:.3e} -> {c2:.3e}, summed residual {s1:.3e} -> {s2:.3e} (ratio {ratio:.2}), \
             Lyapunov excess {:.1e}",
            x1.max(x2)
        ));
    }
    verdict(2, "energy dissipation", pass, detail.join("; "))
}

fn criterion_03_multiplier_bounds() -> Verdict {
    let runs = sweep();
    let alpha = runs[0].cfg.alpha;
    let scaled: Vec<f64> = runs
        .iter()
        .map(|t| t.cfg.eps.powf(alpha / 2.0) * sup(t, |r| r.lambda.abs()))
        .collect();
    let l2: Vec<f64> = runs.iter().map(|t| t.records.last().unwrap().lambda_l2_cum).collect();
    let pass = spread(&scaled) < 4.0 && spread(&l2) < 4.0;
    verdict(
        3,
        "multiplier bounds",
        pass,
        format!(
            "eps^(a/2) sup|lambda| = {scaled:.4?} (spread {:.2}); int lambda^2 = [{}] (spread {:.2})",
            spread(&scaled),
            sci(&l2),
            spread(&l2)
        ),
    )
}

fn criterion_04_volume_preservation() -> Verdict {
    let runs = sweep();
    let alpha = runs[0].cfg.alpha;
    let scaled: Vec<f64> = runs
        .iter()
        .map(|t| t.cfg.eps.powf(-alpha / 2.0) * sup(t, |r| r.vol_weighted_drift))
        .collect();
    let single = preset_run("single_ball");
    let v0 = single.records[0].vol_indicator;
    let drift = single.records.iter().map(|r| (r.vol_indicator - v0).abs()).fold(0.0, f64::max);
    let r = single.cfg.initial.balls[0].radius;
    let h2 = 2.0 * single.h;
    let annulus = std::f64::consts::PI * ((r + h2).powi(2) - (r - h2).powi(2));
    let pass = spread(&scaled) < 4.0 && drift <= annulus;
    verdict(
        4,
        "volume preservation",
        pass,
        format!(
            "eps^(-a/2) sup drift = [{}] (spread {:.2}); single_ball indicator drift {drift:.4e} vs 2h-annulus {annulus:.4e}",
            sci(&scaled),
            spread(&scaled)
        ),
    )
}

fn criterion_05_discrepancy() -> Verdict {
    let runs = sweep();
    let alpha = runs[0].cfg.alpha;
    let avg: Vec<f64> = runs
        .iter()
        .map(|t| {
            // trapezoid in time over the records
            let r = &t.records;
            let total: f64 = r.windows(2).map(|w| 0.5 * (w[0].int_abs_xi + w[1].int_abs_xi) * (w[1].t - w[0].t)).sum();
            total / r.last().unwrap().t
        })
        .collect();
    let scaled: Vec<f64> = runs
        .iter()
        .map(|t| sup(t, |r| r.sup_xi).max(0.0) * t.cfg.eps.powf((1.0 + alpha / 2.0) / 2.0))
        .collect();
    let decreasing = avg.windows(2).all(|w| w[1] < w[0]);
    // sup xi <= 0 meets the upper bound outright; the band applies to the rest
    let positive: Vec<f64> = scaled.iter().cloned().filter(|&s| s > 0.0).collect();
    let bounded = positive.is_empty() || spread(&positive) < 4.0;
    let pass = decreasing && bounded;
    verdict(
        5,
        "discrepancy",
        pass,
        format!("time-averaged int|xi| = [{}]; sup xi * eps^((1+a/2)/2) = [{}]", sci(&avg), sci(&scaled)),
    )
}

fn criterion_06_barriers_and_non_intrusion() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in ["pinned_inner", "outer_obstacle"] {
        let t = preset_run(name);
        let bp = sup(t, |r| r.barrier_violation_plus);
        let bm = sup(t, |r| r.barrier_violation_minus);
        let intrusion_ok = t
            .intrusion
            .iter()
            .all(|i| i.plus <= i.collar_plus && i.minus <= i.collar_minus);
        let worst = t.intrusion.iter().map(|i| i.plus.max(i.minus)).fold(0.0, f64::max);
        pass &= bp <= 1e-6 && bm <= 1e-6 && intrusion_ok;
        detail.push(format!(
            "{name}: violation +{bp:.2e}/-{bm:.2e}, max intrusion {worst:.3e} vs collar {:.3e}",
            t.intrusion[0].collar_plus.max(t.intrusion[0].collar_minus)
        ));
    }
    verdict(6, "barriers and non-intrusion", pass, detail.join("; "))
}

fn criterion_07_oracle_agreement() -> Verdict {
    // two_balls: relative error while both radii are resolved
    let t = preset_run("two_balls");
    let oracle = oracle_for(t);
    let floor = (4.0 * t.cfg.eps).max(8.0 * t.h);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut until = 0.0;
    for (rec, radii) in t.records.iter().zip(&t.radii) {
        if radii.iter().any(|&r| r < floor) {
            break;
        }
        let want = oracle.radii_at(rec.t);
        for (got, want) in radii.iter().zip(&want) {
            worst = worst.max((got - want).abs() / want);
        }
        compared += 1;
        until = rec.t;
    }
    let two_ok = compared > 0 && worst <= 0.05;

    // pinned_inner: the inner circle settles on the obstacle, the free one follows the oracle
    let p = preset_run("pinned_inner");
    let po = oracle_for(p);
    let last = p.radii.last().unwrap();
    let obstacle_r = p.cfg.obstacles.plus[0].radius;
    let pin_ok = (last[0] - obstacle_r).abs() <= 2.0 * p.cfg.eps;
    let want_free = po.samples.last().unwrap().radii[1];
    let free_err = (last[1] - want_free).abs() / want_free;
    let pinned_in_oracle = po.samples.last().unwrap().pinned[0];
    let pass = two_ok && pin_ok && free_err <= 0.05;
    verdict(
        7,
        "oracle agreement",
        pass,
        format!(
            "two_balls: worst relative error {worst:.3} over {compared} records up to t = {until:.2e}; \
             pinned_inner: inner radius {:.4} vs obstacle {obstacle_r} (tolerance {:.3}), free radius {:.4} vs oracle {want_free:.4} \
             (error {free_err:.3}, oracle pinned: {pinned_in_oracle})",
            last[0],
            2.0 * p.cfg.eps,
            last[1]
        ),
    )
}

fn criterion_08_stationarity() -> Verdict {
    let t = preset_run("single_ball");
    let r0 = t.radii[0][0];
    let worst = t.radii.iter().map(|r| (r[0] - r0).abs()).fold(0.0, f64::max);
    let pass = worst <= 2.0 * t.h;
    verdict(
        8,
        "stationarity",
        pass,
        format!(
            "radius {r0:.4} -> {:.4}, max change {worst:.4e} vs 2h = {:.4e}",
            t.radii.last().unwrap()[0],
            2.0 * t.h
        ),
    )
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .filter(|(name, _)| name == "diag.csv" || name.ends_with(".fld"))
        .collect()
}

fn criterion_09_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let dir = tmp.path().join(sub);
        let cfg = preset_cfg("two_balls", &format!("t_end=0.002\nsnapshot_every=20\noutput_dir={}", dir.display()));
        emit_run(&cfg).unwrap();
        dir_bytes(&dir)
    };
    let a = run("a");
    let b = run("b");
    let pass = a.len() > 2 && a == b;
    verdict(
        9,
        "determinism",
        pass,
        format!("{} files compared byte for byte", a.len()),
    )
}

fn criterion_10_well_preparedness() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in RUN_PRESETS {
        let cfg = preset_cfg(name, "t_end=0");
        let sim = Simulation::<f64>::new(&cfg);
        let ok = sim.as_ref().is_ok_and(|s| s.well_prepared().is_some_and(|r| r.passes()));
        let r = sim.as_ref().ok().and_then(|s| s.well_prepared().copied());
        pass &= ok;
        detail.push(match r {
            Some(r) => format!("{name}: xi0 {:.1e}, omega {:.3}, mu0 {:.4}", r.max_xi0, r.omega_margin, r.energy0),
            None => format!("{name}: rejected"),
        });
    }
    let runs = sweep();
    let energies: Vec<f64> = runs.iter().map(|t| t.energy0).collect();
    let uniform = spread(&energies) - 1.0 < 0.10;
    pass &= uniform && runs.iter().all(|t| t.well_prepared);
    detail.push(format!("sweep mu0 = {energies:.4?} (spread {:.3})", spread(&energies)));
    verdict(10, "well-preparedness", pass, detail.join("; "))
}

const CRITERIA: [(u32, &str, fn() -> Verdict); 10] = [
    (1, "maximum principle", criterion_01_maximum_principle),
    (2, "energy dissipation", criterion_02_energy_dissipation),
    (3, "multiplier bounds", criterion_03_multiplier_bounds),
    (4, "volume preservation", criterion_04_volume_preservation),
    (5, "discrepancy", criterion_05_discrepancy),
    (6, "barriers and non-intrusion", criterion_06_barriers_and_non_intrusion),
    (7, "oracle agreement", criterion_07_oracle_agreement),
    (8, "stationarity", criterion_08_stationarity),
    (9, "determinism", criterion_09_determinism),
    (10, "well-preparedness", criterion_10_well_preparedness),
];

fn panic_message(e: &(dyn std::any::Any + Send)) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() -> ExitCode {
    let start = Instant::now();
    let verdicts: Vec<Verdict> = thread::scope(|scope| {
        let handles: Vec<_> = CRITERIA.iter().map(|&(_, _, f)| scope.spawn(f)).collect();
        handles
            .into_iter()
            .zip(CRITERIA)
            .map(|(h, (n, name, _))| {
                h.join().unwrap_or_else(|e| verdict(n, name, false, format!("panicked: {}", panic_message(&*e))))
            })
            .collect()
    });
    for v in &verdicts {
        println!(
            "criterion {} [PRIMARY] {}: {} ({})",
            v.n,
            v.name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!(
        "acceptance: {passed}/{} criteria passed in {:.1}s",
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if passed == verdicts.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
