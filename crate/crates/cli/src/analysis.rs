//! The `analyze` command: every requested test on one dataset.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use permreg::cluster::{self, ClusterStructure, Scenario};
use permreg::inference;
use permreg::lm::{self, X2};
use permreg::rng::derive_seed;
use permreg::schemes::{self, Collinearity, NullOptions, PermutationScheme, Sampling};
use permreg::{stats, Dataset};
use serde::Serialize;

use crate::input::{self, ColumnSpec, InputError, LabelCode};
use crate::OutputFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum AnalysisMethod {
    Permutation(PermutationScheme),
    Ols,
}

impl AnalysisMethod {
    /// Order used when `all` is requested.
    pub const ALL: [AnalysisMethod; 5] = [
        AnalysisMethod::Permutation(PermutationScheme::PermuteX2),
        AnalysisMethod::Permutation(PermutationScheme::PermuteY),
        AnalysisMethod::Permutation(PermutationScheme::ReducedResiduals),
        AnalysisMethod::Permutation(PermutationScheme::FullResiduals),
        AnalysisMethod::Ols,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AnalysisMethod::Permutation(s) => s.label(),
            AnalysisMethod::Ols => "ols",
        }
    }

    /// Expands `all` in place.
    pub fn parse_list<S: AsRef<str>>(items: &[S]) -> Result<Vec<AnalysisMethod>, String> {
        let mut out = Vec::new();
        for item in items {
            match item.as_ref().trim() {
                "all" => out.extend(Self::ALL),
                s => out.push(s.parse()?),
            }
        }
        Ok(out)
    }
}

impl From<AnalysisMethod> for String {
    fn from(m: AnalysisMethod) -> String {
        m.label().to_string()
    }
}

impl fmt::Display for AnalysisMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AnalysisMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ols" {
            return Ok(AnalysisMethod::Ols);
        }
        s.parse::<PermutationScheme>()
            .map(AnalysisMethod::Permutation)
            .map_err(|_| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMode {
    Independent,
    Homogeneous,
    Heterogeneous,
    Auto,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisConfig {
    pub input_path: PathBuf,
    #[serde(flatten)]
    pub columns: ColumnSpec,
    pub methods: Vec<AnalysisMethod>,
    pub cluster_mode: ClusterMode,
    #[serde(rename = "B")]
    pub permutations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub output_format: OutputFormat,
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("the number of permutations must be at least 1")]
    NoPermutations,
    #[error("no methods requested")]
    NoMethods,
    #[error("cluster mode `{0:?}` needs a family column")]
    MissingFamilies(ClusterMode),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub n: usize,
    pub dropped_rows: usize,
    pub scenario: Scenario,
    pub families: Option<usize>,
    pub collinearity: Collinearity,
    pub treatment_coding: Option<Vec<LabelCode>>,
    pub columns: Vec<ColumnSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: AnalysisMethod,
    pub t_obs: Option<f64>,
    pub p_value: Option<f64>,
    #[serde(rename = "B")]
    pub permutations: usize,
    pub seed: Option<u64>,
    /// Cluster scenario the permutations were restricted to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restriction: Option<Scenario>,
    pub exhaustive: bool,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    pub diagnostics: Diagnostics,
    pub rows: Vec<ReportRow>,
}

fn summary(name: &str, v: &[f64]) -> ColumnSummary {
    ColumnSummary {
        name: name.to_string(),
        mean: stats::mean(v),
        sd: if v.len() > 1 { stats::variance(v).sqrt() } else { 0.0 },
        min: v.iter().cloned().fold(f64::INFINITY, f64::min),
        max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn resolve_scenario(mode: ClusterMode, data: &Dataset) -> Result<Scenario, AnalysisError> {
    match (mode, data.family_id()) {
        (ClusterMode::Independent, _) => Ok(Scenario::Independent),
        (ClusterMode::Auto, None) => Ok(Scenario::Independent),
        (ClusterMode::Auto, Some(ids)) => Ok(Scenario::infer(ids, data.x2())),
        (m, None) => Err(AnalysisError::MissingFamilies(m)),
        (ClusterMode::Homogeneous, Some(_)) => Ok(Scenario::Homogeneous),
        (ClusterMode::Heterogeneous, Some(_)) => Ok(Scenario::Heterogeneous),
    }
}

fn ols_row(data: &Dataset) -> permreg::Result<ReportRow> {
    data.validate()?;
    let fit = lm::fit_full(data)?;
    Ok(ReportRow {
        method: AnalysisMethod::Ols,
        t_obs: Some(lm::t_statistic(&fit, X2, 0.0)?),
        p_value: Some(inference::ols_p_value(&fit, X2)?),
        permutations: 0,
        seed: None,
        restriction: None,
        exhaustive: false,
        warnings: Vec::new(),
        error: None,
    })
}

fn permutation_row(
    scheme: PermutationScheme,
    data: &Dataset,
    scenario: Scenario,
    config: &AnalysisConfig,
    collinearity: &Collinearity,
) -> permreg::Result<ReportRow> {
    data.validate()?;
    let seed = derive_seed(config.seed, scheme.label(), 0);
    let opts = NullOptions::new(config.permutations, seed).sampling(Sampling::default());
    let mut warnings = Vec::new();
    let restricted = scenario != Scenario::Independent && scheme == PermutationScheme::PermuteX2;
    let null = if restricted {
        let structure = ClusterStructure::from_dataset(data, scenario)?;
        cluster::cluster_null_distribution_with(data, &structure, &opts)?
    } else {
        if scenario != Scenario::Independent {
            warnings.push(format!(
                "naive permutation on clustered data ({scenario} families): rows are permuted as if independent, which is not advised"
            ));
        }
        schemes::null_distribution_with(scheme, data, &opts)?
    };
    if scheme == PermutationScheme::ReducedResiduals && collinearity.warning {
        warnings.push(format!(
            "|r(x1, x2)| = {:.3} is high; permuted reduced-model responses may remain correlated with x2",
            collinearity.r.abs()
        ));
    }
    if null.failed_draws > 0 {
        let fate = if null.exhaustive { "excluded from the enumeration" } else { "redrawn" };
        warnings.push(format!("{} degenerate draws (perfect fit or collinear design) were {fate}", null.failed_draws));
    }
    Ok(ReportRow {
        method: AnalysisMethod::Permutation(scheme),
        t_obs: Some(null.t_obs),
        p_value: Some(inference::permutation_p_value(null.t_obs, &null)?),
        permutations: null.b,
        seed: Some(seed),
        restriction: null.restriction,
        exhaustive: null.exhaustive,
        warnings,
        error: None,
    })
}

pub fn run_analysis(config: &AnalysisConfig) -> Result<Report, AnalysisError> {
    if config.permutations == 0 {
        return Err(AnalysisError::NoPermutations);
    }
    if config.methods.is_empty() {
        return Err(AnalysisError::NoMethods);
    }
    let parsed = input::parse_dataset(&config.input_path, &config.columns)?;
    let data = &parsed.dataset;
    let scenario = resolve_scenario(config.cluster_mode, data)?;
    let collinearity = schemes::collinearity_diagnostic(data);

    let rows = config
        .methods
        .iter()
        .map(|&method| {
            let result = match method {
                AnalysisMethod::Ols => ols_row(data),
                AnalysisMethod::Permutation(s) => permutation_row(s, data, scenario, config, &collinearity),
            };
            result.unwrap_or_else(|e| ReportRow {
                method,
                t_obs: None,
                p_value: None,
                permutations: 0,
                seed: None,
                restriction: None,
                exhaustive: false,
                warnings: Vec::new(),
                error: Some(format!("{method}: {e}")),
            })
        })
        .collect();

    let families = data.family_id().map(|ids| {
        let mut ids: Vec<&String> = ids.iter().collect();
        ids.sort();
        ids.dedup();
        ids.len()
    });
    let c = &config.columns;
    Ok(Report {
        provenance: Provenance {
            tool: "permreg",
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(config).expect("config serializes"),
            seed: config.seed,
        },
        diagnostics: Diagnostics {
            n: data.len(),
            dropped_rows: parsed.dropped_rows,
            scenario,
            families,
            collinearity,
            treatment_coding: parsed.treatment_coding.clone(),
            columns: vec![
                summary(&c.response, data.y()),
                summary(&c.covariate, data.x1()),
                summary(&c.treatment, data.x2()),
            ],
        },
        rows,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

impl Report {
    /// Aligned-text rendering; p-values are shown to two decimals.
    pub fn to_text(&self) -> String {
        let d = &self.diagnostics;
        let mut out = String::new();
        let _ = writeln!(out, "n = {} ({} rows dropped), scenario: {}", d.n, d.dropped_rows, d.scenario);
        if let Some(f) = d.families {
            let _ = writeln!(out, "families: {f}");
        }
        let _ = writeln!(
            out,
            "r(x1, x2) = {:.3}{}",
            d.collinearity.r,
            if d.collinearity.warning { " (high collinearity)" } else { "" }
        );
        if let Some(coding) = &d.treatment_coding {
            let pairs: Vec<String> = coding.iter().map(|c| format!("{} = {}", c.label, c.value)).collect();
            let _ = writeln!(out, "treatment coding: {}", pairs.join(", "));
        }
        let _ = writeln!(out, "seed: {}", self.provenance.seed);
        out.push('\n');

        let header = ["method", "t_obs", "p-value", "B"];
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.method.to_string(),
                    fmt_opt(r.t_obs, 3),
                    fmt_opt(r.p_value, 2),
                    if r.error.is_some() {
                        "-".to_string()
                    } else if r.exhaustive {
                        format!("{} (all)", r.permutations)
                    } else if r.permutations == 0 {
                        "-".to_string()
                    } else {
                        r.permutations.to_string()
                    },
                ]
            })
            .collect();
        out.push_str(&crate::table(&header, &cells));

        let notes: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| {
                let restricted = r.restriction.map(|s| format!("{}: permutations restricted to {s} families", r.method));
                restricted
                    .into_iter()
                    .chain(r.warnings.iter().map(move |w| format!("{}: warning: {w}", r.method)))
                    .chain(r.error.iter().map(|e| format!("error: {e}")))
            })
            .collect();
        if !notes.is_empty() {
            out.push('\n');
            for n in notes {
                let _ = writeln!(out, "{n}");
            }
        }
        out
    }
}
