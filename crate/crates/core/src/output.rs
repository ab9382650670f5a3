//! Run artifacts: `diag.csv`, `snap_<step>.fld`, `oracle.csv` and
//! `manifest.txt` with SHA-256 digests of every emitted file.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::SimConfig;
use crate::diagnostics::{DiagnosticsRecord, CSV_HEADER};
use crate::dynamics::{Observer, Simulation};
use crate::fields::{ScalarField, TorusGrid};
use crate::oracle::{default_dt, integrate_oracle, BallConfig};
use crate::presets;
use crate::{Error, Real, Result};

pub const DIAG_FILE: &str = "diag.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn snapshot_name(step: u64) -> String {
    format!("snap_{step:08}.fld")
}

/// Header followed by little-endian `f64` values in row-major order.
pub fn encode_snapshot<T: Real>(field: &ScalarField<T>, t: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = format!("VPMCF1\nd={}\nn={}\nt={}\n", g.d(), g.n(), t).into_bytes();
    out.reserve(field.values().len() * 8);
    for v in field.values() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(f64, ScalarField<f64>)> {
    let mut pos = 0;
    let mut lines = Vec::new();
    for _ in 0..4 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::domain("snapshot header truncated"))?;
        lines.push(std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| Error::domain("snapshot header is not UTF-8"))?);
        pos += end + 1;
    }
    if lines[0] != "VPMCF1" {
        return Err(Error::domain("not a VPMCF1 snapshot"));
    }
    let field = |line: &str, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .map(str::to_string)
            .ok_or_else(|| Error::domain(format!("snapshot header: expected `{key}`")))
    };
    let bad = |what: &str| Error::domain(format!("snapshot header: malformed {what}"));
    let d: usize = field(lines[1], "d=")?.parse().map_err(|_| bad("d"))?;
    let n: usize = field(lines[2], "n=")?.parse().map_err(|_| bad("n"))?;
    let t: f64 = field(lines[3], "t=")?.parse().map_err(|_| bad("t"))?;
    let grid = TorusGrid::new(d, n)?;
    let payload = &bytes[pos..];
    if payload.len() != grid.len() * 8 {
        return Err(Error::domain(format!(
            "snapshot payload has {} bytes, expected {}",
            payload.len(),
            grid.len() * 8
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((t, ScalarField::from_values(grid, values)?))
}

pub fn read_snapshot(path: &Path) -> Result<(f64, ScalarField<f64>)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Tracks created files so a failed run can be rolled back.
struct Emitted {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
}

impl Emitted {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    fn rollback(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

struct FileEmitter<'a> {
    out: &'a mut Emitted,
    diag: BufWriter<File>,
    diag_path: PathBuf,
}

impl<T: Real> Observer<T> for FileEmitter<'_> {
    fn record(&mut self, _sim: &Simulation<T>, rec: &DiagnosticsRecord<T>) -> Result<()> {
        writeln!(self.diag, "{}", rec.csv_row()).map_err(|e| Error::io(&self.diag_path, e))
    }

    fn snapshot(&mut self, sim: &Simulation<T>) -> Result<()> {
        let s = sim.state();
        self.out.write(&snapshot_name(s.step), &encode_snapshot(&s.phi, s.t.as_f64()))
    }
}

/// Everything needed to reproduce a run, plus digests of what it wrote.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config: SimConfig,
    pub output_dir: PathBuf,
    /// `(file name, sha256 hex)`, sorted by name.
    pub digests: Vec<(String, String)>,
    pub steps: u64,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = self.config.render();
        s.push_str(&format!("steps={}\n", self.steps));
        for (name, digest) in &self.digests {
            s.push_str(&format!("sha256.{name}={digest}\n"));
        }
        s
    }
}

fn has_oracle_twin(cfg: &SimConfig) -> bool {
    cfg.preset
        .as_deref()
        .and_then(|p| presets::find(p).ok())
        .is_some_and(|p| p.oracle)
}

/// Sharp-interface trajectory over the configured horizon, as CSV.
pub fn oracle_csv(cfg: &SimConfig) -> Result<String> {
    let balls = BallConfig::<f64>::from_config(cfg)?;
    let tr = integrate_oracle(&balls, cfg.d, cfg.t_end, default_dt(&balls))?;
    Ok(tr.csv())
}

/// Runs `cfg` into `cfg.output_dir`. On failure every file written by this
/// call is removed again.
pub fn emit_run(cfg: &SimConfig) -> Result<RunManifest> {
    let dir = cfg.output_dir.clone();
    let created_dir = !dir.exists();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = Emitted {
        dir: dir.clone(),
        created_dir,
        files: Vec::new(),
    };
    match emit_into(cfg, &mut out) {
        Ok(m) => Ok(m),
        Err(e) => {
            out.rollback();
            Err(e)
        }
    }
}

fn emit_into(cfg: &SimConfig, out: &mut Emitted) -> Result<RunManifest> {
    let mut sim = Simulation::<f64>::new(cfg)?;
    let diag_path = out.dir.join(DIAG_FILE);
    out.files.push(diag_path.clone());
    let file = File::create(&diag_path).map_err(|e| Error::io(&diag_path, e))?;
    let mut diag = BufWriter::new(file);
    writeln!(diag, "{CSV_HEADER}").map_err(|e| Error::io(&diag_path, e))?;
    let mut emitter = FileEmitter {
        out,
        diag,
        diag_path: diag_path.clone(),
    };
    sim.run_with(&mut emitter)?;
    emitter.diag.flush().map_err(|e| Error::io(&diag_path, e))?;
    drop(emitter);
    if has_oracle_twin(cfg) {
        out.write(ORACLE_FILE, oracle_csv(cfg)?.as_bytes())?;
    }
    let mut digests = out
        .files
        .iter()
        .map(|p| {
            let name = p.file_name().expect("file name").to_string_lossy().into_owned();
            Ok((name, sha256_file(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    digests.sort();
    let manifest = RunManifest {
        config: cfg.clone(),
        output_dir: out.dir.clone(),
        digests,
        steps: sim.state().step,
    };
    out.write(MANIFEST_FILE, manifest.render().as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn snapshot_header_and_payload() {
        let g = TorusGrid::new(2, 256).unwrap();
        let f = ScalarField::from_fn(g, |x: &[f64]| x[0] - x[1]);
        let bytes = encode_snapshot(&f, 0.0);
        let header = b"VPMCF1\nd=2\nn=256\nt=0\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len() - header.len(), 524288);
        let (t, back) = decode_snapshot(&bytes).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(back, f);
        assert!(decode_snapshot(&bytes[..100]).is_err());
    }

    #[test]
    fn zero_horizon_artifacts_and_determinism() {
        let tmp = tempfile::tempdir().unwrap();
        let run_into = |sub: &str| {
            let dir = tmp.path().join(sub);
            let cfg = parse_config(&format!(
                "preset=single_ball\nn=128\nt_end=0\noutput_dir={}",
                dir.display()
            ))
            .unwrap();
            (emit_run(&cfg).unwrap(), dir)
        };
        let (m1, dir) = run_into("a");
        let diag = fs::read_to_string(dir.join(DIAG_FILE)).unwrap();
        assert_eq!(diag.lines().count(), 2);
        assert_eq!(diag.lines().next().unwrap(), CSV_HEADER);
        assert!(dir.join("snap_00000000.fld").exists());
        assert!(dir.join(ORACLE_FILE).exists());
        let manifest = fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("sha256.diag.csv="));
        let (m2, _) = run_into("b");
        assert_eq!(m1.digests, m2.digests);
    }

    #[test]
    fn failed_run_leaves_nothing_behind() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("bad");
        // U₀ is the whole torus: validation fails after the directory exists
        let cfg = parse_config(&format!(
            "preset=single_ball\nn=64\nepsilon=0.08\ninitial=balls:complement\noutput_dir={}",
            dir.display()
        ))
        .unwrap();
        let err = emit_run(&cfg).unwrap_err();
        assert_eq!(err.category(), "validation");
        assert!(!dir.exists());
    }
}
