//! Run configuration: a single TOML tree with per-subcommand sections,
//! dotted-path overrides, and a canonical digest for the manifest.

use incipient_core::law::{OffspringLaw, StepLaw};
use incipient_core::Result as CoreResult;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub law: LawSpec,
    #[serde(default)]
    pub step: StepSpec,
    #[serde(default)]
    pub brw: BrwSection,
    #[serde(default)]
    pub iibrw: IibrwSection,
    #[serde(default)]
    pub rpoint: RpointSection,
    #[serde(default)]
    pub mm: MmSection,
    #[serde(default)]
    pub scaling: ScalingSection,
    #[serde(default)]
    pub op: OpSection,
    #[serde(default)]
    pub usf: UsfSection,
    #[serde(default)]
    pub invade: InvadeSection,
    #[serde(default)]
    pub verify: VerifySection,
}

impl Default for Config {
    fn default() -> Self {
        toml::from_str("").expect("empty config populates all defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    /// binary | poisson1 | explicit
    pub kind: String,
    #[serde(default = "LawSpec::default_m_max")]
    pub m_max: usize,
    #[serde(default)]
    pub probs: Vec<f64>,
}

impl LawSpec {
    fn default_m_max() -> usize {
        10
    }

    pub fn build(&self) -> Result<OffspringLaw, ConfigError> {
        let out: CoreResult<OffspringLaw> = match self.kind.as_str() {
            "binary" => Ok(OffspringLaw::binary()),
            "poisson1" => OffspringLaw::poisson1(self.m_max),
            "explicit" => {
                if self.probs.is_empty() {
                    return Err(ConfigError("law.probs must be nonempty for an explicit law".into()));
                }
                OffspringLaw::new(self.probs.clone())
            }
            other => {
                return Err(ConfigError(format!(
                    "law.kind must be binary, poisson1, or explicit (got {other:?})"
                )))
            }
        };
        out.map_err(|e| ConfigError(format!("law: {e}")))
    }
}

impl Default for LawSpec {
    fn default() -> Self {
        Self {
            kind: "binary".into(),
            m_max: Self::default_m_max(),
            probs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    /// simple | spread_out
    pub kind: String,
    #[serde(default = "StepSpec::default_dim")]
    pub dim: usize,
    #[serde(default = "StepSpec::default_l")]
    pub l: i64,
}

impl StepSpec {
    fn default_dim() -> usize {
        1
    }

    fn default_l() -> i64 {
        1
    }

    pub fn build(&self) -> Result<StepLaw, ConfigError> {
        match self.kind.as_str() {
            "simple" => Ok(StepLaw::simple(self.dim)),
            "spread_out" => StepLaw::spread_out(self.dim, self.l)
                .map_err(|e| ConfigError(format!("step: {e}"))),
            other => Err(ConfigError(format!(
                "step.kind must be simple or spread_out (got {other:?})"
            ))),
        }
    }
}

impl Default for StepSpec {
    fn default() -> Self {
        Self {
            kind: "simple".into(),
            dim: Self::default_dim(),
            l: Self::default_l(),
        }
    }
}

macro_rules! section {
    ($name:ident { $($(#[$meta:meta])* $field:ident : $ty:ty = $default:expr),+ $(,)? }) => {
        #[derive(Debug, Clone, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $($(#[$meta])* pub $field: $ty,)+
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)+ }
            }
        }
    };
}

section!(BrwSection {
    horizon: usize = 20,
    samples: usize = 1000,
});

section!(IibrwSection {
    /// sample | exact
    mode: String = "sample".into(),
    horizon: usize = 10,
    samples: usize = 1000,
    /// finite-horizon comparison scale for exact mode
    n: usize = 10_000,
});

section!(RpointSection {
    /// tau | rho
    object: String = "tau".into(),
    times: Vec<usize> = vec![1],
    kvecs: Vec<Vec<f64>> = vec![vec![0.0]],
});

section!(MmSection {
    /// sbm | icsbm
    object: String = "icsbm".into(),
    times: Vec<f64> = vec![1.0],
    kvecs: Vec<Vec<f64>> = vec![vec![0.0]],
    tol: f64 = 1e-8,
});

section!(ScalingSection {
    times: Vec<f64> = vec![1.0],
    kvecs: Vec<Vec<f64>> = vec![vec![0.0]],
    scales: Vec<usize> = vec![50, 100, 200],
    tol: f64 = 1e-8,
});

section!(OpSection {
    /// theta | pc | rpoint | ballmass | disjoint
    action: String = "theta".into(),
    dim: usize = 5,
    l: i64 = 3,
    p: f64 = 1.0,
    horizon: usize = 30,
    samples: usize = 10_000,
    lo: f64 = 0.9,
    hi: f64 = 1.1,
    times: Vec<usize> = vec![5],
    kvecs: Vec<Vec<f64>> = vec![vec![0.0; 5]],
    radii: Vec<f64> = vec![2.0, 4.0, 6.0, 8.0],
    from: usize = 3,
    to: usize = 9,
});

section!(UsfSection {
    dim: usize = 2,
    n: i64 = 32,
    times: Vec<usize> = vec![2],
    kvecs: Vec<Vec<f64>> = vec![vec![0.0, 0.0]],
    samples: usize = 100,
});

section!(InvadeSection {
    dim: usize = 2,
    budget: usize = 10_000,
    cap: Option<f64> = None,
});

section!(VerifySection {
    /// exact | statistical-fast | statistical-full
    suite: String = "exact".into(),
});

/// Loads the TOML file (or an empty tree), applies dotted-path overrides,
/// and deserializes with field-level diagnostics.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut tree: toml::Value = text
        .parse()
        .map_err(|e| ConfigError(format!("config parse error: {e}")))?;
    for item in overrides {
        apply_override(&mut tree, item)?;
    }
    Config::deserialize(tree).map_err(|e| ConfigError(format!("invalid config: {e}")))
}

fn apply_override(tree: &mut toml::Value, item: &str) -> Result<(), ConfigError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override {item:?} is not of the form path=value")))?;
    let parsed: toml::Value = format!("v = {raw}")
        .parse::<toml::Value>()
        .map(|t| t["v"].clone())
        .or_else(|_| format!("v = {raw:?}").parse::<toml::Value>().map(|t| t["v"].clone()))
        .map_err(|e| ConfigError(format!("override value {raw:?}: {e}")))?;
    let mut node = tree;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("override path {path:?} crosses a non-table")))?;
        if i == parts.len() - 1 {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    unreachable!()
}

/// Canonical digest: sha256 of the key-sorted JSON encoding of the
/// validated config.
pub fn digest(cfg: &Config) -> String {
    let json = serde_json::to_value(cfg).expect("config serializes");
    let canonical = serde_json::to_string(&json).expect("json serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
