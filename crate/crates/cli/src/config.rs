//! Line-based configuration files.
//!
//! ```text
//! # comment
//! [domain]
//! L = 3.14159
//! N = 200
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rdcert::grid::{BoundaryCondition, Field, Grid1D};
use rdcert::profiles::TimeProfile;
use rdcert::solver::{InitialCondition, Scheme};
use rdcert::stability::Mat2;

const PROFILE_KEYS: [&str; 5] = ["kind", "v0", "exponent", "rate", "offset"];

fn known_keys(section: &str) -> Option<Vec<String>> {
    let own = |keys: &[&str]| keys.iter().map(|k| k.to_string()).collect::<Vec<_>>();
    let with_profiles = |base: &[&str], prefixes: &[&str]| {
        let mut v = own(base);
        for p in prefixes {
            v.extend(PROFILE_KEYS.iter().map(|k| format!("{p}{k}")));
        }
        v
    };
    Some(match section {
        "domain" => own(&["L", "N", "bc"]),
        "kinetics" => with_profiles(&["matrix", "p", "lipschitz_cf"], &["", "c0_"]),
        "diffusion" | "modulation" => with_profiles(&[], &[""]),
        "run" => own(&["T", "dt", "record_every", "seed", "ic", "ic_file", "scheme"]),
        "certificate" => with_profiles(
            &[
                "family",
                "mu0",
                "mu1",
                "nu",
                "m",
                "q",
                "g0",
                "horizon",
                "grid_points",
                "tol",
                "slack",
                "fraction",
                "mu_ratio",
                "agmon",
            ],
            &["sigma_", "alpha_"],
        ),
        "theorem" => own(&["name"]),
        "dispersion" => own(&["k_max", "samples", "growth_modes"]),
        _ => return None,
    })
}

/// A configuration error; always names the offending section and key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    dir: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Config::parse(&text)?;
        cfg.dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return err(format!("line {line_no}: malformed section header `{line}`"));
                };
                let name = name.trim().to_string();
                if known_keys(&name).is_none() {
                    return err(format!("line {line_no}: unknown section [{name}]"));
                }
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {line_no}: expected `key = value`, got `{line}`"));
            };
            let Some(section) = &current else {
                return err(format!("line {line_no}: key outside of any section"));
            };
            let key = key.trim();
            if !known_keys(section).unwrap_or_default().iter().any(|k| k == key) {
                return err(format!("line {line_no}: unknown key [{section}].{key}"));
            }
            let value = value.trim().trim_matches('"').to_string();
            let entries = sections.get_mut(section).expect("section registered on header");
            if entries.insert(key.to_string(), value).is_some() {
                return err(format!("line {line_no}: duplicate key [{section}].{key}"));
            }
        }
        Ok(Config {
            sections,
            dir: PathBuf::new(),
        })
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn str_req(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.raw(section, key)
            .ok_or_else(|| ConfigError(format!("missing key [{section}].{key}")))
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(section, key).map(|v| parse_f64(section, key, v)).transpose()
    }

    pub fn f64_req(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        parse_f64(section, key, self.str_req(section, key)?)
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    pub fn usize_opt(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(section, key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| ConfigError(format!("[{section}].{key}: expected a non-negative integer, got `{v}`")))
            })
            .transpose()
    }

    pub fn usize_req(&self, section: &str, key: &str) -> Result<usize, ConfigError> {
        self.usize_opt(section, key)?
            .ok_or_else(|| ConfigError(format!("missing key [{section}].{key}")))
    }

    pub fn positive(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        let v = self.f64_req(section, key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            err(format!("[{section}].{key} must be positive, got {v}"))
        }
    }

    /// Reads `{prefix}kind`, `{prefix}v0`, `{prefix}exponent`, `{prefix}rate`,
    /// `{prefix}offset`. A bare `v0` without a kind is a constant.
    pub fn profile(&self, section: &str, prefix: &str) -> Result<Option<TimeProfile>, ConfigError> {
        let Some(v0) = self.raw(section, &format!("{prefix}v0")) else {
            if let Some(kind) = self.raw(section, &format!("{prefix}kind")) {
                return err(format!("[{section}].{prefix}kind = {kind} needs [{section}].{prefix}v0"));
            }
            return Ok(None);
        };
        let v0 = parse_f64(section, &format!("{prefix}v0"), v0)?;
        self.profile_with_v0(section, prefix, v0).map(Some)
    }

    fn profile_with_v0(&self, section: &str, prefix: &str, v0: f64) -> Result<TimeProfile, ConfigError> {
        let key = |k: &str| format!("{prefix}{k}");
        let kind = self.raw(section, &key("kind")).unwrap_or("constant");
        let profile = match kind {
            "constant" => TimeProfile::constant(v0),
            "power_decay" => TimeProfile::power_decay(v0, self.f64_req(section, &key("exponent"))?),
            "power_growth" => TimeProfile::power_growth(v0, self.f64_req(section, &key("exponent"))?),
            "exponential" => TimeProfile::exponential(v0, self.f64_req(section, &key("rate"))?),
            other => {
                return err(format!(
                    "[{section}].{prefix}kind: unknown profile `{other}` \
                     (expected constant, power_decay, power_growth, exponential)"
                ))
            }
        };
        let offset = self.f64_or(section, &key("offset"), 0.0)?;
        let profile = if offset != 0.0 { profile.with_offset(offset) } else { profile };
        profile
            .validate()
            .map_err(|e| ConfigError(format!("[{section}].{prefix}kind: {e}")))?;
        Ok(profile)
    }

    /// Diffusion profiles; `v0` may list one value per component.
    pub fn diffusion(&self, n_components: usize) -> Result<Vec<TimeProfile>, ConfigError> {
        let v0 = self.str_req("diffusion", "v0")?;
        let values = v0
            .split(',')
            .map(|s| parse_f64("diffusion", "v0", s.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        let values = match values.len() {
            1 => vec![values[0]; n_components],
            n if n == n_components => values,
            n => return err(format!("[diffusion].v0: expected 1 or {n_components} values, got {n}")),
        };
        values
            .into_iter()
            .map(|v| {
                if !(v > 0.0) {
                    return err(format!("[diffusion].v0 must be positive, got {v}"));
                }
                self.profile_with_v0("diffusion", "", v)
            })
            .collect()
    }

    pub fn matrix(&self) -> Result<Option<Mat2>, ConfigError> {
        let Some(raw) = self.raw("kinetics", "matrix") else {
            return Ok(None);
        };
        let rows: Vec<&str> = raw.split(';').collect();
        let parse_row = |r: &str| {
            r.split(',')
                .map(|s| parse_f64("kinetics", "matrix", s.trim()))
                .collect::<Result<Vec<_>, _>>()
        };
        if rows.len() != 2 {
            return err(format!("[kinetics].matrix: expected \"a,b;c,d\", got `{raw}`"));
        }
        let (r1, r2) = (parse_row(rows[0])?, parse_row(rows[1])?);
        if r1.len() != 2 || r2.len() != 2 {
            return err(format!("[kinetics].matrix: expected \"a,b;c,d\", got `{raw}`"));
        }
        Ok(Some(Mat2::new(r1[0], r1[1], r2[0], r2[1])))
    }

    pub fn grid(&self) -> Result<Grid1D, ConfigError> {
        self.grid_with_bc(self.bc()?.unwrap_or(BoundaryCondition::Dirichlet))
    }

    pub fn grid_with_bc(&self, bc: BoundaryCondition) -> Result<Grid1D, ConfigError> {
        let length = self.positive("domain", "L")?;
        let n = self.usize_req("domain", "N")?;
        Grid1D::new(length, n, bc).map_err(|e| ConfigError(format!("[domain].N: {e}")))
    }

    pub fn bc(&self) -> Result<Option<BoundaryCondition>, ConfigError> {
        match self.raw("domain", "bc") {
            None => Ok(None),
            Some("dirichlet") => Ok(Some(BoundaryCondition::Dirichlet)),
            Some("neumann") => Ok(Some(BoundaryCondition::Neumann)),
            Some(other) => err(format!("[domain].bc: expected dirichlet or neumann, got `{other}`")),
        }
    }

    pub fn scheme(&self) -> Result<Scheme, ConfigError> {
        match self.raw("run", "scheme").unwrap_or("two_stage") {
            "two_stage" => Ok(Scheme::TwoStage),
            "one_stage" => Ok(Scheme::OneStage),
            other => err(format!("[run].scheme: expected one_stage or two_stage, got `{other}`")),
        }
    }

    /// `[run] ic`: `zero`, `noise(eps)`, `mode(n, amp)` or `file` (with `ic_file`).
    pub fn initial(&self, grid: &Grid1D, n_components: usize, seed: Option<u64>) -> Result<InitialCondition, ConfigError> {
        let raw = self.str_req("run", "ic")?;
        let seed = match seed {
            Some(s) => s,
            None => self.raw("run", "seed").map_or(Ok(0), |s| {
                s.parse::<u64>()
                    .map_err(|_| ConfigError(format!("[run].seed: expected an unsigned integer, got `{s}`")))
            })?,
        };
        let call = |name: &str| {
            raw.strip_prefix(name)
                .and_then(|r| r.trim().strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(|args| args.split(',').map(str::trim).collect::<Vec<_>>())
        };
        if raw == "zero" {
            return Ok(InitialCondition::Zero);
        }
        if raw == "file" {
            return self.initial_from_file(grid, n_components);
        }
        if let Some(args) = call("noise") {
            if let [eps] = args[..] {
                let eps = parse_f64("run", "ic", eps)?;
                if eps >= 0.0 {
                    return Ok(InitialCondition::Noise { eps, seed });
                }
            }
        }
        if let Some(args) = call("mode") {
            if let [n, amp] = args[..] {
                let n = n
                    .parse::<usize>()
                    .map_err(|_| ConfigError(format!("[run].ic: mode number must be an integer, got `{n}`")))?;
                return Ok(InitialCondition::Mode {
                    n,
                    amp: parse_f64("run", "ic", amp)?,
                });
            }
        }
        err(format!(
            "[run].ic: expected zero, noise(eps), mode(n, amp) or file, got `{raw}`"
        ))
    }

    /// Reads a field CSV with columns `x, u1, ..., un` matching the grid nodes.
    fn initial_from_file(&self, grid: &Grid1D, n_components: usize) -> Result<InitialCondition, ConfigError> {
        let rel = self.str_req("run", "ic_file")?;
        let path = self.dir.join(rel);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| ConfigError(format!("[run].ic_file: cannot read {}: {e}", path.display())))?;
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|s| parse_f64("run", "ic_file", s.trim()))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        if rows.len() != grid.n_nodes() || rows.iter().any(|r| r.len() != n_components + 1) {
            return err(format!(
                "[run].ic_file: expected {} rows of {} columns",
                grid.n_nodes(),
                n_components + 1
            ));
        }
        let mut values = Vec::with_capacity(n_components * grid.n_nodes());
        for i in 0..n_components {
            values.extend(rows.iter().map(|r| r[i + 1]));
        }
        let field = Field::from_values(grid, n_components, values).map_err(|e| ConfigError(format!("[run].ic_file: {e}")))?;
        Ok(InitialCondition::Values(field))
    }
}

fn parse_f64(section: &str, key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(format!("[{section}].{key}: expected a finite number, got `{v}`")),
    }
}
