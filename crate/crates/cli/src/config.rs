//! Run configuration files.
//!
//! ```toml
//! [problem]
//! name = "paper3d-1form"     # or inline: n, k, bc, u, du, sigma, dsigma
//!
//! [terms]
//! active = ["l4"]            # "all", "none" or a list; default: every key given
//! l5 = [["10", "0"], ["0", "sin(pi*x)"]]   # rows of expressions, or "preset"
//!
//! [pair]
//! pair_id = 1
//! r = 1
//!
//! [mesh]
//! m_list = [2, 4, 8]
//! perturb = 0.2
//! seed = 0
//!
//! [output]
//! csv = "report.csv"
//! markdown = "report.md"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use feec_core::combinat::binomial;
use feec_core::perturbed::{CoefficientField, LowerOrderTerms, ALL_TERMS};
use feec_core::spaces::BcMode;
use feec_core::study::{builtin_problem, ManufacturedSolution, PerturbedProblem, DEFAULT_PERTURB};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },

    #[error("[{section}] {key}: {message}")]
    Invalid { section: &'static str, key: String, message: String },
}

fn invalid(section: &'static str, key: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { section, key: key.into(), message: message.to_string() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub terms: TermsSection,
    pub pair: PairSection,
    pub mesh: MeshSection,
    #[serde(default)]
    pub output: OutputSection,
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: Option<String>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub bc: Option<String>,
    pub u: Option<Vec<String>>,
    pub du: Option<Vec<String>>,
    pub sigma: Option<Vec<String>>,
    pub dsigma: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TermSpec {
    /// `"preset"`: the built-in problem's coefficient.
    Preset(String),
    /// Rows of expression strings in the lexicographic form basis.
    Matrix(Vec<Vec<String>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Active {
    Keyword(String),
    List(Vec<String>),
}

// Unknown keys land in `fields` and are rejected during resolution.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct TermsSection {
    pub active: Option<Active>,
    #[serde(flatten)]
    pub fields: BTreeMap<String, TermSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    pub pair_id: usize,
    pub r: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub m_list: Vec<usize>,
    #[serde(default = "default_perturb")]
    pub perturb: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_perturb() -> f64 {
    DEFAULT_PERTURB
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
    pub markdown: Option<PathBuf>,
}

/// Resonance scan over `l5 = -λ I` on the first mesh of `m_list`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ScanSection {
    pub fn lambdas(&self) -> Result<Vec<f64>, ConfigError> {
        if self.step.is_nan() || self.step <= 0.0 || self.stop <= self.start {
            return Err(invalid("scan", "step", "need start < stop and step > 0"));
        }
        let count = ((self.stop - self.start) / self.step).floor() as usize + 1;
        if count < 3 {
            return Err(invalid("scan", "step", "scan needs at least three values"));
        }
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// A fully resolved study: problem, exact solution and discretization.
pub struct Study {
    pub problem: PerturbedProblem,
    pub exact: ManufacturedSolution,
    pub pair_id: usize,
    pub r: usize,
    pub m_list: Vec<usize>,
    pub perturb: f64,
    pub seed: u64,
    pub csv: PathBuf,
    pub markdown: PathBuf,
    pub scan: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.to_path_buf(), source },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: PathBuf::from("<config>"), source })
    }

    pub fn resolve(&self) -> Result<Study, ConfigError> {
        if self.mesh.m_list.is_empty() {
            return Err(invalid("mesh", "m_list", "must not be empty"));
        }
        if self.mesh.m_list.contains(&0) {
            return Err(invalid("mesh", "m_list", "entries must be positive"));
        }
        if !(1..=4).contains(&self.pair.pair_id) {
            return Err(invalid("pair", "pair_id", format!("{} is not in 1..=4", self.pair.pair_id)));
        }
        if self.pair.r == 0 {
            return Err(invalid("pair", "r", "degree must be at least 1"));
        }
        let (problem, exact) = self.resolve_problem()?;
        let stem = format!("{}-pair{}-r{}", problem.name, self.pair.pair_id, self.pair.r);
        Ok(Study {
            problem,
            exact,
            pair_id: self.pair.pair_id,
            r: self.pair.r,
            m_list: self.mesh.m_list.clone(),
            perturb: self.mesh.perturb,
            seed: self.mesh.seed,
            csv: self.output.csv.clone().unwrap_or_else(|| format!("{stem}.csv").into()),
            markdown: self.output.markdown.clone().unwrap_or_else(|| format!("{stem}.md").into()),
            scan: self.scan.as_ref().map(ScanSection::lambdas).transpose()?,
        })
    }

    fn term_keys(&self) -> Result<Vec<usize>, ConfigError> {
        self.terms
            .fields
            .keys()
            .map(|key| term_index(key).ok_or_else(|| invalid("terms", key.clone(), "unknown key (expected active, l1..l5)")))
            .collect()
    }

    fn active_mask(&self) -> Result<u8, ConfigError> {
        let given = self.term_keys()?.into_iter().fold(0u8, |m, i| m | 1 << (i - 1));
        match &self.terms.active {
            None => Ok(given),
            Some(Active::Keyword(w)) if w == "all" => Ok(ALL_TERMS),
            Some(Active::Keyword(w)) if w == "none" => Ok(0),
            Some(Active::Keyword(w)) => Err(invalid("terms", "active", format!("`{w}` (expected all, none or a list)"))),
            Some(Active::List(names)) => names.iter().try_fold(0u8, |m, name| {
                term_index(name)
                    .map(|i| m | 1 << (i - 1))
                    .ok_or_else(|| invalid("terms", "active", format!("unknown term `{name}`")))
            }),
        }
    }

    fn resolve_problem(&self) -> Result<(PerturbedProblem, ManufacturedSolution), ConfigError> {
        let mask = self.active_mask()?;
        let p = &self.problem;
        if let Some(name) = &p.name {
            if p.u.is_some() || p.n.is_some() {
                return Err(invalid("problem", "name", "give either a built-in name or an inline problem, not both"));
            }
            let (mut problem, exact) = builtin_problem(name, mask).map_err(|e| invalid("problem", "name", e))?;
            for (key, spec) in &self.terms.fields {
                let i = term_index(key).expect("checked");
                if mask & (1 << (i - 1)) == 0 {
                    continue;
                }
                if let TermSpec::Matrix(rows) = spec {
                    if i == 2 {
                        return Err(invalid("terms", key.clone(), "l2 enters sigma; use an inline problem to change it"));
                    }
                    problem.terms.set(i, Some(matrix_term(problem.n, problem.k, key, i, rows)?));
                } else {
                    check_preset(key, spec)?;
                }
            }
            return Ok((problem, exact));
        }

        let n = p.n.ok_or_else(|| invalid("problem", "n", "required without a name"))?;
        let k = p.k.ok_or_else(|| invalid("problem", "k", "required without a name"))?;
        if !(2..=3).contains(&n) || k > n {
            return Err(invalid("problem", "k", format!("need n in 2..=3 and k <= n, got n={n}, k={k}")));
        }
        let bc = match p.bc.as_deref().unwrap_or("natural") {
            "natural" => BcMode::Natural,
            "essential" => BcMode::Essential,
            other => return Err(invalid("problem", "bc", format!("`{other}` (expected natural or essential)"))),
        };
        let need = |key: &'static str, v: &Option<Vec<String>>| v.clone().ok_or_else(|| invalid("problem", key, "required"));
        let u = need("u", &p.u)?;
        let du = need("du", &p.du)?;
        let (sigma, dsigma) = if k == 0 { (vec![], vec![]) } else { (need("sigma", &p.sigma)?, need("dsigma", &p.dsigma)?) };
        for (key, list, degree) in [("u", &u, k), ("du", &du, k + 1), ("sigma", &sigma, k.wrapping_sub(1)), ("dsigma", &dsigma, k)] {
            if k == 0 && (key == "sigma" || key == "dsigma") {
                continue;
            }
            for (j, e) in list.iter().enumerate() {
                feec_core::coefex::parse_in_dim(e, n).map_err(|err| invalid("problem", format!("{key}[{j}]"), err))?;
            }
            let want = if degree <= n { binomial(n, degree) } else { 0 };
            if list.len() != want {
                return Err(invalid("problem", key, format!("needs {want} components, got {}", list.len())));
            }
        }
        let exact = ManufacturedSolution::from_exprs(n, k, &u, &du, &sigma, &dsigma).map_err(|e| invalid("problem", "u", e))?;
        let mut terms = LowerOrderTerms::none();
        for (key, spec) in &self.terms.fields {
            let i = term_index(key).expect("checked");
            if mask & (1 << (i - 1)) == 0 {
                continue;
            }
            match spec {
                TermSpec::Matrix(rows) => terms.set(i, Some(matrix_term(n, k, key, i, rows)?)),
                TermSpec::Preset(_) => return Err(invalid("terms", key.clone(), "presets need a built-in problem name")),
            }
        }
        let name = "inline".to_string();
        Ok((PerturbedProblem { name, n, k, bc, terms }, exact))
    }
}

fn term_index(key: &str) -> Option<usize> {
    match key {
        "l1" => Some(1),
        "l2" => Some(2),
        "l3" => Some(3),
        "l4" => Some(4),
        "l5" => Some(5),
        _ => None,
    }
}

fn check_preset(key: &str, spec: &TermSpec) -> Result<(), ConfigError> {
    match spec {
        TermSpec::Preset(s) if s == "preset" => Ok(()),
        TermSpec::Preset(s) => Err(invalid("terms", key.to_string(), format!("`{s}` (expected \"preset\" or a matrix)"))),
        TermSpec::Matrix(_) => Ok(()),
    }
}

/// Coefficient of term `i` from rows of expressions, checked against the
/// `C(n, k_out) x C(n, k_in)` shape.
fn matrix_term(n: usize, k: usize, key: &str, i: usize, rows: &[Vec<String>]) -> Result<CoefficientField, ConfigError> {
    let (k_in, k_out) = LowerOrderTerms::level(i, k)
        .filter(|&(a, b)| a <= n && b <= n)
        .ok_or_else(|| invalid("terms", key.to_string(), format!("term does not exist for {k}-forms in {n}D")))?;
    let (nr, nc) = (binomial(n, k_out), binomial(n, k_in));
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        let got: Vec<usize> = rows.iter().map(Vec::len).collect();
        return Err(invalid("terms", key.to_string(), format!("expected {nr}x{nc} matrix, got rows of lengths {got:?}")));
    }
    let entries: Vec<&str> = rows.iter().flatten().map(String::as_str).collect();
    for (j, e) in entries.iter().enumerate() {
        feec_core::coefex::parse_in_dim(e, n)
            .map_err(|err| invalid("terms", format!("{key}[{}][{}]", j / nc, j % nc), err))?;
    }
    CoefficientField::from_exprs(n, k_in, k_out, &entries).map_err(|e| invalid("terms", key.to_string(), e))
}
