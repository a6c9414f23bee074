//! Flat `key = value` run configuration: parsing, validation, and the
//! resolved copy written into every output directory.
//!
//! The format is deliberately primitive: one assignment per line, `#` starts
//! a comment, later assignments override earlier ones, and `ic_mode` may
//! repeat to accumulate cosine terms. Unknown keys are errors, never
//! silently ignored.

use anyhow::{anyhow, bail, Context, Result};
use mpfc::verify::{CosMode, ModeSet};
use mpfc::Params;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub const REQUIRED_KEYS: [&str; 7] = ["m", "n", "h", "s", "T", "alpha", "beta"];

const DEFAULT_TOL_REL: f64 = 1e-10;
const DEFAULT_TOL_ABS: f64 = 1e-13;
const DEFAULT_MAX_NEWTON: usize = 50;
const DEFAULT_TRACE_INTERVAL: usize = 1;
const DEFAULT_SNAPSHOT_INTERVAL: usize = 100;

/// How the initial condition was specified, kept for the resolved copy.
#[derive(Debug, Clone, PartialEq)]
pub enum IcSpec {
    Preset(&'static str),
    Modes { offset: f64, modes: Vec<CosMode> },
}

/// A fully validated run configuration with every default materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub t_final: f64,
    pub steps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub trace_interval: usize,
    pub snapshot_interval: usize,
    pub ic_spec: IcSpec,
}

impl RunConfig {
    pub fn initial_condition(&self) -> ModeSet {
        match &self.ic_spec {
            IcSpec::Preset("benchmark") => ModeSet::benchmark(),
            IcSpec::Preset(name) => unreachable!("unvalidated preset {name}"),
            IcSpec::Modes { offset, modes } => ModeSet {
                offset: *offset,
                modes: modes.clone(),
            },
        }
    }

    /// The config re-serialized with all defaults spelled out; parsing this
    /// text reproduces the config exactly.
    pub fn resolved_text(&self) -> String {
        let p = &self.params;
        let mut out = String::from("# resolved configuration (all defaults materialized)\n");
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("m", p.m.to_string());
        kv("n", p.n.to_string());
        kv("h", format!("{:e}", p.h));
        kv("s", format!("{:e}", p.s));
        kv("T", format!("{:e}", self.t_final));
        kv("alpha", format!("{:e}", p.alpha));
        kv("beta", format!("{:e}", p.beta));
        kv("tol_rel", format!("{:e}", p.tol_rel));
        kv("tol_abs", format!("{:e}", p.tol_abs));
        kv("max_newton", p.max_newton.to_string());
        kv("seed", self.seed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("trace_interval", self.trace_interval.to_string());
        kv("snapshot_interval", self.snapshot_interval.to_string());
        match &self.ic_spec {
            IcSpec::Preset(name) => kv("ic_preset", (*name).to_string()),
            IcSpec::Modes { offset, modes } => {
                kv("ic_offset", format!("{offset:e}"));
                for m in modes {
                    kv(
                        "ic_mode",
                        format!(
                            "{:e},{},{},{:e},{:e}",
                            m.amplitude, m.kx, m.ky, m.phase_x, m.phase_y
                        ),
                    );
                }
            }
        }
        out
    }
}

/// One parsed assignment with its source line for error messages.
struct Entry {
    line: usize,
    value: String,
}

pub fn parse_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_str(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_str(text: &str) -> Result<RunConfig> {
    const KNOWN: [&str; 17] = [
        "m", "n", "h", "s", "T", "alpha", "beta", "tol_rel", "tol_abs", "max_newton", "seed",
        "out_dir", "trace_interval", "snapshot_interval", "ic_preset", "ic_offset", "ic_mode",
    ];
    let mut single: HashMap<&str, Entry> = HashMap::new();
    let mut modes: Vec<Entry> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| anyhow!("line {line}: expected 'key = value', got '{content}'"))?;
        let (key, value) = (key.trim(), value.trim().to_string());
        let Some(&known) = KNOWN.iter().find(|&&k| k == key) else {
            bail!("line {line}: unknown key '{key}'");
        };
        let entry = Entry { line, value };
        if known == "ic_mode" {
            modes.push(entry);
        } else {
            single.insert(known, entry);
        }
    }

    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .filter(|k| !single.contains_key(**k))
        .copied()
        .collect();
    if !missing.is_empty() {
        bail!(
            "missing required key(s) {}; required: {}; optional with defaults: tol_rel={DEFAULT_TOL_REL:e}, tol_abs={DEFAULT_TOL_ABS:e}, max_newton={DEFAULT_MAX_NEWTON}, seed=0, out_dir=out, trace_interval={DEFAULT_TRACE_INTERVAL}, snapshot_interval={DEFAULT_SNAPSHOT_INTERVAL}, ic_preset/ic_offset/ic_mode (default: constant 0)",
            missing.join(", "),
            REQUIRED_KEYS.join(", ")
        );
    }

    fn want<T: std::str::FromStr>(single: &HashMap<&str, Entry>, key: &str, what: &str) -> Result<T> {
        let e = &single[key];
        e.value.parse().map_err(|_| {
            anyhow!(
                "line {}: key '{key}': expected {what}, got '{}'",
                e.line,
                e.value
            )
        })
    }
    fn opt<T: std::str::FromStr>(
        single: &HashMap<&str, Entry>,
        key: &str,
        what: &str,
        default: T,
    ) -> Result<T> {
        if single.contains_key(key) {
            want(single, key, what)
        } else {
            Ok(default)
        }
    }

    let m: usize = want(&single, "m", "a positive integer")?;
    let n: usize = want(&single, "n", "a positive integer")?;
    let h: f64 = want(&single, "h", "a real number")?;
    let s: f64 = want(&single, "s", "a real number")?;
    let t_final: f64 = want(&single, "T", "a real number")?;
    let alpha: f64 = want(&single, "alpha", "a real number")?;
    let beta: f64 = want(&single, "beta", "a real number")?;

    let mut params = Params::new(beta, alpha, m, n, h, s);
    params.tol_rel = opt(&single, "tol_rel", "a real number", DEFAULT_TOL_REL)?;
    params.tol_abs = opt(&single, "tol_abs", "a real number", DEFAULT_TOL_ABS)?;
    params.max_newton = opt(&single, "max_newton", "a positive integer", DEFAULT_MAX_NEWTON)?;
    params.validate().map_err(|e| anyhow!("{e}"))?;

    if !t_final.is_finite() || t_final <= 0.0 {
        bail!("key 'T': final time must be positive (got {t_final})");
    }
    let steps = (t_final / s).round();
    if steps < 1.0 || (steps * s - t_final).abs() > 1e-9 * t_final {
        bail!("key 'T': final time must be a positive integer multiple of the step size s = {s} (got {t_final})");
    }
    let steps = steps as usize;

    let seed: u64 = opt(&single, "seed", "an unsigned integer", 0)?;
    let out_dir = PathBuf::from(
        single
            .get("out_dir")
            .map(|e| e.value.clone())
            .unwrap_or_else(|| "out".to_string()),
    );
    let trace_interval: usize =
        opt(&single, "trace_interval", "a positive integer", DEFAULT_TRACE_INTERVAL)?;
    let snapshot_interval: usize = opt(
        &single,
        "snapshot_interval",
        "a positive integer",
        DEFAULT_SNAPSHOT_INTERVAL,
    )?;
    for (key, v) in [
        ("trace_interval", trace_interval),
        ("snapshot_interval", snapshot_interval),
    ] {
        if v < 1 {
            bail!("key '{key}': interval must be >= 1 (got {v})");
        }
    }

    let ic_spec = match single.get("ic_preset") {
        Some(e) => {
            if single.contains_key("ic_offset") || !modes.is_empty() {
                bail!(
                    "line {}: 'ic_preset' cannot be combined with 'ic_offset' or 'ic_mode'",
                    e.line
                );
            }
            match e.value.as_str() {
                "benchmark" => IcSpec::Preset("benchmark"),
                "constant" => IcSpec::Modes {
                    offset: 0.0,
                    modes: Vec::new(),
                },
                other => bail!(
                    "line {}: key 'ic_preset': expected 'benchmark' or 'constant', got '{other}'",
                    e.line
                ),
            }
        }
        None => {
            let offset: f64 = opt(&single, "ic_offset", "a real number", 0.0)?;
            let parsed: Result<Vec<CosMode>> = modes.iter().map(parse_mode).collect();
            IcSpec::Modes {
                offset,
                modes: parsed?,
            }
        }
    };

    let config = RunConfig {
        params,
        t_final,
        steps,
        seed,
        out_dir,
        trace_interval,
        snapshot_interval,
        ic_spec,
    };
    config
        .initial_condition()
        .validate_for_grid(m, n)
        .map_err(|e| anyhow!("initial condition: {e}"))?;
    Ok(config)
}

/// `ic_mode = amplitude,kx,ky,phase_x,phase_y`
fn parse_mode(e: &Entry) -> Result<CosMode> {
    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        bail!(
            "line {}: key 'ic_mode': expected 'amplitude,kx,ky,phase_x,phase_y', got '{}'",
            e.line,
            e.value
        );
    }
    let num = |i: usize, what: &str| -> Result<f64> {
        parts[i]
            .parse()
            .map_err(|_| anyhow!("line {}: key 'ic_mode': {what} '{}' is not a number", e.line, parts[i]))
    };
    let int = |i: usize, what: &str| -> Result<i64> {
        parts[i]
            .parse()
            .map_err(|_| anyhow!("line {}: key 'ic_mode': {what} '{}' is not an integer", e.line, parts[i]))
    };
    Ok(CosMode {
        amplitude: num(0, "amplitude")?,
        kx: int(1, "kx")?,
        ky: int(2, "ky")?,
        phase_x: num(3, "phase_x")?,
        phase_y: num(4, "phase_y")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "m = 16\nn = 16\nh = 2.0\ns = 0.1\nT = 1.0\nalpha = 1.0\nbeta = 1.0\n";

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let cfg = parse_str(MINIMAL).unwrap();
        assert_eq!(cfg.params.m, 16);
        assert_eq!(cfg.params.tol_rel, 1e-10);
        assert_eq!(cfg.params.tol_abs, 1e-13);
        assert_eq!(cfg.params.max_newton, 50);
        assert_eq!(cfg.steps, 10);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert_eq!(cfg.trace_interval, 1);
        assert_eq!(cfg.snapshot_interval, 100);
        assert_eq!(
            cfg.ic_spec,
            IcSpec::Modes {
                offset: 0.0,
                modes: vec![]
            }
        );
    }

    #[test]
    fn comments_blanks_and_overrides_are_handled() {
        let text = format!("{MINIMAL}\n# a comment\n\n  s = 0.25 # inline\nT = 1.0\n");
        let cfg = parse_str(&text).unwrap();
        assert_eq!(cfg.params.s, 0.25);
        assert_eq!(cfg.steps, 4);
    }

    #[test]
    fn unknown_key_is_an_error_naming_key_and_line() {
        let err = parse_str(&format!("{MINIMAL}mm = 3\n")).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("unknown key 'mm'"), "{msg}");
        assert!(msg.contains("line 8"), "{msg}");
    }

    #[test]
    fn missing_required_key_lists_it_and_the_defaults() {
        let err = parse_str("m = 16\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("missing required key(s) n, h, s, T, alpha, beta"), "{msg}");
        assert!(msg.contains("tol_rel=1e-10"), "{msg}");
    }

    #[test]
    fn negative_beta_is_rejected_citing_the_rule() {
        let text = MINIMAL.replace("beta = 1.0", "beta = -1");
        let msg = format!("{:#}", parse_str(&text).unwrap_err());
        assert!(msg.contains("beta >= 0"), "{msg}");
    }

    #[test]
    fn unresolvable_mode_is_rejected() {
        let text = format!("{MINIMAL}ic_mode = 0.1,16,0,0,0\n");
        let msg = format!("{:#}", parse_str(&text).unwrap_err());
        assert!(msg.contains("kx"), "{msg}");
    }

    #[test]
    fn bad_final_time_is_rejected() {
        let text = MINIMAL.replace("T = 1.0", "T = 0.35");
        let msg = format!("{:#}", parse_str(&text).unwrap_err());
        assert!(msg.contains("integer multiple"), "{msg}");
    }

    #[test]
    fn preset_conflicts_with_explicit_modes() {
        let text = format!("{MINIMAL}ic_preset = benchmark\nic_offset = 0.1\n");
        let msg = format!("{:#}", parse_str(&text).unwrap_err());
        assert!(msg.contains("cannot be combined"), "{msg}");
    }

    #[test]
    fn mode_lines_accumulate_in_order() {
        let text = format!(
            "{MINIMAL}ic_offset = 0.07\nic_mode = -0.02,1,1,0.5,-0.25\nic_mode = 0.01,2,1,0,0\n"
        );
        let cfg = parse_str(&text).unwrap();
        let ic = cfg.initial_condition();
        assert_eq!(ic.offset, 0.07);
        assert_eq!(ic.modes.len(), 2);
        assert_eq!(ic.modes[0].kx, 1);
        assert_eq!(ic.modes[1].amplitude, 0.01);
    }

    #[test]
    fn resolved_text_round_trips_exactly() {
        for text in [
            MINIMAL.to_string(),
            format!("{MINIMAL}ic_preset = benchmark\nseed = 42\ntol_rel = 1e-9\n"),
            format!("{MINIMAL}ic_offset = 0.07\nic_mode = -0.02,1,1,0.5,-0.25\n"),
        ] {
            let cfg = parse_str(&text).unwrap();
            let round = parse_str(&cfg.resolved_text()).unwrap();
            assert_eq!(cfg, round);
        }
    }
}
