//! Line-oriented experiment configuration.
//!
//! ```text
//! file    := line*
//! line    := blank | comment | header | entry
//! comment := '#' any*
//! header  := '[' name ']'
//! entry   := key '=' value
//! value   := item (',' item)*
//! ```
//! Every key belongs to a section; unknown sections or keys, repeated keys and
//! values of the wrong type are errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::analysis::{within_flux_cap, BundleSpec, FLUX_FINENESS_CAP};
use crate::covering::DEFAULT_DIM_CAP;
use crate::eigensolve::EigenRequest;
use crate::error::{Error, Result};
use crate::geometry::{build_sphere_model, build_torus_model, ModelManifold};
use crate::operators::WilsonParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lichnerowicz,
    Gap,
    Schrodinger,
    Decay,
    Covering,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lichnerowicz, Suite::Gap, Suite::Schrodinger, Suite::Decay, Suite::Covering];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lichnerowicz => "lichnerowicz",
            Suite::Gap => "gap",
            Suite::Schrodinger => "schrodinger",
            Suite::Decay => "decay",
            Suite::Covering => "covering",
        }
    }
}

/// Parse a comma-separated suite list; `all` selects every suite.
pub fn parse_suites(text: &str) -> std::result::Result<Vec<Suite>, String> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        if item == "all" {
            out.extend(Suite::ALL);
            continue;
        }
        match Suite::ALL.iter().find(|s| s.name() == item) {
            Some(s) => out.push(*s),
            None => return Err(format!("unknown suite '{item}' (expected gap, schrodinger, lichnerowicz, decay, covering or all)")),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Torus { n: usize, sides: Vec<f64>, resolution: usize, a: Vec<f64> },
    Sphere { radius: f64, flux: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_basis: Option<usize>,
    /// Mass-term strength; 0 gives the bare operator.
    pub wilson: f64,
    pub wilson_power: u32,
}

impl SolverSettings {
    pub fn wilson_params(&self) -> Option<WilsonParams> {
        (self.wilson > 0.0).then_some(WilsonParams { strength: self.wilson, power: self.wilson_power })
    }

    pub fn request(&self, count: usize, seed: u64) -> EigenRequest {
        let mut r = EigenRequest::new(count).tolerance(self.tolerance).max_iterations(self.max_iterations).seed(seed);
        if let Some(b) = self.max_basis {
            r = r.max_basis(b);
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringSettings {
    pub scales: Vec<usize>,
    /// Cutoffs for the distribution function; empty selects `-kλ, kλ, 3kλ/2` per `k`.
    pub mu: Vec<f64>,
    pub dim_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub bundle: BundleSpec,
    pub k_min: u32,
    pub k_max: u32,
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub output: PathBuf,
    pub solver: SolverSettings,
    pub covering: CoveringSettings,
}

impl ExperimentConfig {
    pub fn ks(&self) -> Vec<u32> {
        (self.k_min..=self.k_max).collect()
    }

    pub fn build_model(&self) -> Result<ModelManifold> {
        match &self.model {
            ModelSpec::Torus { n, sides, resolution, a } => build_torus_model(*n, sides, *resolution, a),
            ModelSpec::Sphere { radius, flux } => build_sphere_model(*radius, *flux),
        }
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Sections {
    map: BTreeMap<(String, String), Entry>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("model", &["kind", "n", "sides", "resolution", "a", "radius", "flux"]),
    ("bundle", &["chern", "rank_e", "chern_e"]),
    ("run", &["k_min", "k_max", "suite", "seed", "output"]),
    ("solver", &["tolerance", "max_iterations", "max_basis", "wilson", "wilson_power"]),
    ("covering", &["scales", "mu", "dim_cap"]),
];

fn tokenize(text: &str) -> Result<Sections> {
    let mut map: BTreeMap<(String, String), Entry> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse { line, message: format!("malformed section header '{body}'") })?
                .trim();
            if !KNOWN.iter().any(|(s, _)| *s == name) {
                return Err(Error::Config { line, message: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: format!("expected key = value, got '{body}'") })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .clone()
            .ok_or_else(|| Error::Config { line, message: format!("key '{key}' appears before any section header") })?;
        let keys = KNOWN.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !keys.contains(&key) {
            return Err(Error::Config { line, message: format!("unknown key '{key}' in [{sec}]") });
        }
        if value.is_empty() {
            return Err(Error::Parse { line, message: format!("key '{key}' has an empty value") });
        }
        if let Some(prev) = map.get(&(sec.clone(), key.to_string())) {
            return Err(Error::Config { line, message: format!("duplicate key '{key}' in [{sec}] (first on line {})", prev.line) });
        }
        map.insert((sec, key.to_string()), Entry { line, value: value.to_string(), used: false });
    }
    Ok(Sections { map })
}

impl Sections {
    fn raw(&mut self, sec: &str, key: &str) -> Option<(usize, String)> {
        self.map.get_mut(&(sec.to_string(), key.to_string())).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn line_of(&self, sec: &str, key: &str) -> usize {
        self.map.get(&(sec.to_string(), key.to_string())).map(|e| e.line).unwrap_or(0)
    }

    fn get<T: std::str::FromStr>(&mut self, sec: &str, key: &str) -> Result<Option<T>> {
        match self.raw(sec, key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("key '{key}': cannot parse '{v}' as {}", type_name::<T>()),
            }),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, sec: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(sec, key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    item.parse::<T>().map_err(|_| Error::Parse {
                        line,
                        message: format!("key '{key}': cannot parse '{item}' as {}", type_name::<T>()),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

fn type_name<T>() -> &'static str {
    let full = std::any::type_name::<T>();
    match full {
        "f64" => "a number",
        "usize" | "u32" | "u64" => "a nonnegative integer",
        "i64" => "an integer",
        _ => full.rsplit("::").next().unwrap_or(full),
    }
}

/// Parse and validate a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut s = tokenize(text)?;
    let cfg_err = |line: usize, message: String| Error::Config { line, message };

    let kind: String = s.get("model", "kind")?.unwrap_or_else(|| "torus".to_string());
    let model = match kind.as_str() {
        "torus" => {
            for key in ["radius", "flux"] {
                if s.raw("model", key).is_some() {
                    return Err(cfg_err(s.line_of("model", key), format!("key '{key}' does not apply to the torus model")));
                }
            }
            let n: usize = s.get("model", "n")?.unwrap_or(1);
            if n == 0 {
                return Err(cfg_err(s.line_of("model", "n"), "n must be at least 1".into()));
            }
            let sides = s.list("model", "sides")?.unwrap_or_else(|| vec![1.0; 2 * n]);
            let resolution = s.get("model", "resolution")?.unwrap_or(16);
            let a = s.list("model", "a")?.unwrap_or_else(|| vec![1.0; n]);
            ModelSpec::Torus { n, sides, resolution, a }
        }
        "sphere" => {
            for key in ["n", "sides", "resolution", "a"] {
                if s.raw("model", key).is_some() {
                    return Err(cfg_err(s.line_of("model", key), format!("key '{key}' does not apply to the sphere model")));
                }
            }
            ModelSpec::Sphere {
                radius: s.get("model", "radius")?.unwrap_or(1.0),
                flux: s.get("model", "flux")?.unwrap_or(1.0),
            }
        }
        other => return Err(cfg_err(s.line_of("model", "kind"), format!("unknown model kind '{other}' (torus or sphere)"))),
    };

    let k_min: u32 = s.get("run", "k_min")?.unwrap_or(1);
    let k_max: u32 = s.get("run", "k_max")?.unwrap_or(4);
    if k_min > k_max {
        return Err(cfg_err(s.line_of("run", "k_max"), format!("empty k-range {k_min}..={k_max}")));
    }
    let suites = match s.raw("run", "suite") {
        None => vec![Suite::Gap],
        Some((line, v)) => parse_suites(&v).map_err(|m| Error::Parse { line, message: format!("key 'suite': {m}") })?,
    };
    let seed = s.get("run", "seed")?.unwrap_or(1);
    let output = PathBuf::from(s.get::<String>("run", "output")?.unwrap_or_else(|| "spinc-out".to_string()));

    let solver = SolverSettings {
        tolerance: s.get("solver", "tolerance")?.unwrap_or(1e-9),
        max_iterations: s.get("solver", "max_iterations")?.unwrap_or(200_000),
        max_basis: s.get("solver", "max_basis")?,
        wilson: s.get("solver", "wilson")?.unwrap_or(WilsonParams::default().strength),
        wilson_power: s.get("solver", "wilson_power")?.unwrap_or(WilsonParams::default().power),
    };
    if !(solver.tolerance > 0.0 && solver.tolerance <= 1e-2) {
        return Err(cfg_err(s.line_of("solver", "tolerance"), "tolerance must lie in (0, 1e-2]".into()));
    }
    if !(solver.wilson >= 0.0 && solver.wilson.is_finite()) {
        return Err(cfg_err(s.line_of("solver", "wilson"), "wilson must be a nonnegative number".into()));
    }
    if solver.wilson_power == 0 {
        return Err(cfg_err(s.line_of("solver", "wilson_power"), "wilson_power must be at least 1".into()));
    }

    let covering = CoveringSettings {
        scales: s.list("covering", "scales")?.unwrap_or_else(|| vec![1, 2]),
        mu: s.list("covering", "mu")?.unwrap_or_default(),
        dim_cap: s.get("covering", "dim_cap")?.unwrap_or(DEFAULT_DIM_CAP),
    };

    let model_line = s.line_of("model", "kind");
    let manifold = match &model {
        ModelSpec::Torus { n, sides, resolution, a } => build_torus_model(*n, sides, *resolution, a),
        ModelSpec::Sphere { radius, flux } => build_sphere_model(*radius, *flux),
    }
    .map_err(|e| cfg_err(model_line, format!("model: {e}")))?;

    let chern: Vec<i64> = s.list("bundle", "chern")?.unwrap_or_else(|| manifold.periods.clone());
    if chern != manifold.periods {
        return Err(cfg_err(
            s.line_of("bundle", "chern"),
            format!("chern {:?} must equal the periods {:?} of the symplectic form", chern, manifold.periods),
        ));
    }
    let rank_e: usize = s.get("bundle", "rank_e")?.unwrap_or(1);
    let chern_e: Vec<i64> = s.list("bundle", "chern_e")?.unwrap_or_else(|| vec![0; manifold.n]);
    let bundle = BundleSpec::new(chern, rank_e, chern_e).map_err(|e| cfg_err(s.line_of("bundle", "rank_e"), e.to_string()))?;

    if let ModelSpec::Torus { resolution, .. } = &model {
        if !within_flux_cap(k_max, &bundle.chern, *resolution) {
            return Err(cfg_err(
                s.line_of("run", "k_max"),
                format!("k_max = {k_max} exceeds the flux fineness cap k * chern / N^2 <= {FLUX_FINENESS_CAP} at N = {resolution}"),
            ));
        }
    } else {
        for suite in &suites {
            if matches!(suite, Suite::Lichnerowicz | Suite::Decay | Suite::Covering) {
                return Err(cfg_err(
                    s.line_of("run", "suite"),
                    format!("suite '{}' needs a lattice; the sphere runs gap and schrodinger analytically", suite.name()),
                ));
            }
        }
    }
    if suites.contains(&Suite::Covering) {
        let sc = &covering.scales;
        if sc.is_empty() || sc[0] == 0 || sc.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg_err(s.line_of("covering", "scales"), "scales must be increasing positive integers".into()));
        }
    }

    Ok(ExperimentConfig { model, bundle, k_min, k_max, suites, seed, output, solver, covering })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("[model]\nkind = torus\n").unwrap();
        assert_eq!(c.model, ModelSpec::Torus { n: 1, sides: vec![1.0, 1.0], resolution: 16, a: vec![1.0] });
        assert_eq!(c.bundle, BundleSpec::line(vec![1]));
        assert_eq!(c.ks(), vec![1, 2, 3, 4]);
        assert_eq!(c.suites, vec![Suite::Gap]);
        assert_eq!(c.solver.wilson_params(), Some(WilsonParams::default()));
        assert_eq!(parse_config("").unwrap(), c);
    }

    #[test]
    fn type_errors_name_the_key() {
        match parse_config("[run]\nk_max=abc\n") {
            Err(Error::Parse { line: 2, message }) => assert!(message.contains("k_max"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn suite_lists() {
        let c = parse_config("[run]\nsuite=gap,decay\n").unwrap();
        assert_eq!(c.suites, vec![Suite::Gap, Suite::Decay]);
        let c = parse_config("[run]\nsuite = all\n").unwrap();
        assert_eq!(c.suites.len(), 5);
        assert!(matches!(parse_config("[run]\nsuite = spectra\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse_config("[nope]\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("[run]\nfoo = 1\n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("[run]\nseed = 1\nseed = 2\n"), Err(Error::Config { line: 3, .. })));
        assert!(matches!(parse_config("k_min = 1\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("[run]\nk_min\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("[run\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn semantic_errors() {
        assert!(matches!(parse_config("[run]\nk_min = 3\nk_max = 2\n"), Err(Error::Config { line: 3, .. })));
        assert!(matches!(parse_config("[model]\nresolution = 8\n[run]\nk_max = 2\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("[bundle]\nchern = 2\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("[model]\nkind = sphere\n[run]\nsuite = decay\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("[model]\nkind = sphere\nresolution = 8\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("[model]\na = 0.5\n"), Err(Error::Config { .. })));
    }

    #[test]
    fn four_torus_and_sphere() {
        let c = parse_config(
            "# T4\n[model]\nkind = torus\nn = 2\nresolution = 16\na = 1, 2\n[bundle]\nchern = 1, 2\nrank_e = 2\nchern_e = 1, 0\n[run]\nk_min = 1\nk_max = 2\n",
        )
        .unwrap();
        assert_eq!(c.bundle.chern, vec![1, 2]);
        assert_eq!(c.build_model().unwrap().n, 2);
        let c = parse_config("[model]\nkind = sphere\nradius = 2\nflux = 1\n[run]\nk_max = 10\nsuite = gap, schrodinger\n").unwrap();
        assert_eq!(c.model, ModelSpec::Sphere { radius: 2.0, flux: 1.0 });
    }
}
