//! Command-line interface: a JSON model config in, CSV / JSON / coordinate
//! text out.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure (a matrix that is not positive definite), 4 a fit that did not
//! converge.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_precision, PrecisionModel};
use crate::coefficients::{AnisotropyJson, AnisotropySpec, BaseFieldJson, FrequencySet, KappaSpec, ParamLayout};
use crate::error::Error;
use crate::gmrf::{correlation_field, marginal_variances, sample_many};
use crate::grid::{CellCoord, GridSpec};
use crate::inference::{
    map_estimate, simulation_study, LatentModel, MapOptions, ObservationModel, ObservationTemplate, Posterior,
};
use crate::io::{field_to_csv, fmt_f64, matrix_to_coordinate, read_field};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// Grid section of the config: `[0, A] x [0, B]` with `M x N` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "A")]
    pub width: f64,
    #[serde(rename = "B")]
    pub height: f64,
    #[serde(rename = "M")]
    pub cells_x: usize,
    #[serde(rename = "N")]
    pub cells_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObservationConfig {
    Exact {
        #[serde(default)]
        data_path: Option<String>,
    },
    Noisy {
        noise_precision: f64,
        #[serde(default)]
        data_path: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutConfig {
    Constant,
    /// Non-zero frequencies `[k, l]`; the constant term is always present.
    Fourier {
        frequencies: Vec<(i64, i64)>,
    },
    FixedField {
        base: BaseFieldJson,
    },
}

/// The JSON model config shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub grid: GridConfig,
    #[serde(default = "one")]
    pub kappa_sq: f64,
    pub anisotropy: AnisotropyJson,
    #[serde(default)]
    pub observation: Option<ObservationConfig>,
    #[serde(default)]
    pub layout: Option<LayoutConfig>,
}

fn one() -> f64 {
    1.0
}

/// A config resolved into library types.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: GridSpec,
    pub kappa: KappaSpec,
    pub anisotropy: AnisotropySpec,
    pub observation: Option<ObservationConfig>,
    pub layout: Option<ParamLayout>,
    /// Directory that relative paths in the config are resolved against.
    pub base_dir: PathBuf,
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("config field `{path}`: {}", e.into_inner()))
        })
    }

    pub fn resolve(&self, base_dir: &Path) -> Result<Model, CliError> {
        let g = self.grid;
        let grid = GridSpec::new(g.width, g.height, g.cells_x, g.cells_y)?;
        let layout = match &self.layout {
            None => None,
            Some(LayoutConfig::Constant) => Some(ParamLayout::Constant),
            Some(LayoutConfig::Fourier { frequencies }) => {
                Some(ParamLayout::fourier(grid.width(), grid.height(), FrequencySet::new(frequencies.iter().copied())?))
            }
            Some(LayoutConfig::FixedField { base }) => Some(ParamLayout::FixedField(base.to_base(&grid, base_dir)?)),
        };
        Ok(Model {
            grid,
            kappa: KappaSpec::new(self.kappa_sq)?,
            anisotropy: self.anisotropy.to_spec(&grid, base_dir)?,
            observation: self.observation.clone(),
            layout,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Model, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text)?.resolve(base)
    }
}

impl Model {
    pub fn assemble(&self) -> Result<PrecisionModel, CliError> {
        Ok(assemble_precision(&self.grid, &self.kappa, &self.anisotropy)?)
    }

    fn layout(&self) -> Result<&ParamLayout, CliError> {
        self.layout.as_ref().ok_or_else(|| CliError::Config("config has no `layout` section".into()))
    }

    fn observation(&self) -> Result<&ObservationConfig, CliError> {
        self.observation.as_ref().ok_or_else(|| CliError::Config("config has no `observation` section".into()))
    }

    /// The anisotropy of the config expressed in the layout's parameters.
    pub fn theta(&self) -> Result<Vec<f64>, CliError> {
        Ok(self.layout()?.pack(&self.anisotropy)?)
    }

    /// Observation model with data read from `data_path`.
    pub fn observations(&self) -> Result<ObservationModel, CliError> {
        let (path, precision) = match self.observation()? {
            ObservationConfig::Exact { data_path } => (data_path, None),
            ObservationConfig::Noisy { data_path, noise_precision } => (data_path, Some(*noise_precision)),
        };
        let path = path.as_ref().ok_or_else(|| CliError::Config("observation has no `data_path`".into()))?;
        let path = self.base_dir.join(path);
        let data = read_field(&path, &self.grid).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(match precision {
            None => ObservationModel::exact(data),
            Some(p) => ObservationModel::noisy(data, p)?,
        })
    }

    pub fn template(&self) -> Result<ObservationTemplate, CliError> {
        Ok(match self.observation()? {
            ObservationConfig::Exact { .. } => ObservationTemplate::Exact,
            ObservationConfig::Noisy { noise_precision, .. } => {
                ObservationTemplate::Noisy { noise_precision: *noise_precision, cells: None }
            }
        })
    }

    pub fn latent_model(&self) -> Result<Arc<LatentModel>, CliError> {
        Ok(Arc::new(LatentModel::new(self.grid, self.kappa, self.layout()?.clone())?))
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    NotConverged,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Numeric(_) => EXIT_NUMERIC,
            Self::NotConverged => EXIT_NOT_CONVERGED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "error: {m}"),
            Self::Numeric(m) => write!(f, "numerical failure: {m}"),
            Self::NotConverged => write!(f, "the optimizer did not converge"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotPositiveDefinite { .. } => Self::Numeric(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fvgmrf", version, about = "Finite-volume GMRFs for anisotropic SPDE fields")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write Q as coordinate text (to --out) and print a JSON summary.
    Assemble(Common),
    /// Draw realizations as CSV blocks separated by blank lines.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Marginal variances as a CSV field.
    Variance(Common),
    /// Correlations with one cell as a CSV field.
    Correlation {
        #[command(flatten)]
        common: Common,
        /// Reference cell `I,J`.
        #[arg(long = "ref", value_parser = parse_cell)]
        reference: CellCoord,
    },
    /// MAP estimate of the layout parameters from the observed data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// JSON array with the starting parameters; defaults to the config's
        /// anisotropy.
        #[arg(long)]
        start: Option<PathBuf>,
        /// Log-posterior evaluation budget.
        #[arg(long, default_value_t = MapOptions::default().max_evals)]
        max_evals: usize,
    },
    /// Simulate datasets from the config's anisotropy and refit each one.
    Study {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// H and v at every cell centre as CSV.
    FieldEval(Common),
}

fn parse_cell(s: &str) -> Result<CellCoord, String> {
    let (i, j) = s.split_once(',').ok_or("expected I,J")?;
    let i = i.trim().parse().map_err(|_| format!("bad column index {i:?}"))?;
    let j = j.trim().parse().map_err(|_| format!("bad row index {j:?}"))?;
    Ok(CellCoord::new(i, j))
}

/// JSON summary printed by `assemble`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembleSummary {
    pub n: usize,
    pub nnz: usize,
    pub max_row_nnz: usize,
    pub min_diagonal: f64,
    pub max_diagonal: f64,
}

fn emit(out: &Option<PathBuf>, stdout: &mut (dyn Write + Send), text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Config(e.to_string())),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn execute(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match &cli.command {
        Command::Assemble(c) => {
            let model = ModelConfig::load(&c.config)?.assemble()?;
            let q = model.precision();
            let diag = q.diagonal();
            let summary = AssembleSummary {
                n: q.n_rows(),
                nnz: q.nnz(),
                max_row_nnz: q.pattern().max_row_nnz(),
                min_diagonal: diag.iter().copied().fold(f64::INFINITY, f64::min),
                max_diagonal: diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            if let Some(p) = &c.out {
                emit(&Some(p.clone()), stdout, &matrix_to_coordinate(q))?;
            }
            emit(&None, stdout, &json(&summary))
        }
        Command::Sample { common, seed, count } => {
            let m = ModelConfig::load(&common.config)?;
            let factor = m.assemble()?.factorize()?;
            let mut text = String::new();
            for (k, r) in sample_many(&factor, *seed, *count).iter().enumerate() {
                if k > 0 {
                    text.push('\n');
                }
                text.push_str(&field_to_csv(&m.grid, &r.values)?);
            }
            emit(&common.out, stdout, &text)
        }
        Command::Variance(c) => {
            let m = ModelConfig::load(&c.config)?;
            let factor = m.assemble()?.factorize()?;
            emit(&c.out, stdout, &field_to_csv(&m.grid, &marginal_variances(&factor))?)
        }
        Command::Correlation { common, reference } => {
            let m = ModelConfig::load(&common.config)?;
            let r = *reference;
            if r.i < 0 || r.j < 0 || r.i as usize >= m.grid.cells_x() || r.j as usize >= m.grid.cells_y() {
                return Err(CliError::Config(format!("reference cell {},{} is outside the grid", r.i, r.j)));
            }
            let factor = m.assemble()?.factorize()?;
            emit(&common.out, stdout, &field_to_csv(&m.grid, &correlation_field(&factor, &m.grid, r)?)?)
        }
        Command::Fit { common, start, max_evals } => {
            let m = ModelConfig::load(&common.config)?;
            let posterior = Posterior::new(m.latent_model()?, m.observations()?)?;
            let theta0 = match start {
                Some(p) => {
                    let text = std::fs::read_to_string(p)
                        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                    serde_json::from_str::<Vec<f64>>(&text)
                        .map_err(|e| CliError::Config(format!("start file {}: {e}", p.display())))?
                }
                None => m.theta()?,
            };
            let opts = MapOptions { max_evals: *max_evals, ..MapOptions::default() };
            let fit = map_estimate(&posterior, &theta0, &opts)?;
            emit(&common.out, stdout, &json(&fit))?;
            if fit.converged {
                Ok(())
            } else {
                Err(CliError::NotConverged)
            }
        }
        Command::Study { common, seed, count } => {
            let m = ModelConfig::load(&common.config)?;
            let truth = m.theta()?;
            let result =
                simulation_study(&m.latent_model()?, &truth, &m.template()?, *count, *seed, &MapOptions::default())?;
            emit(&common.out, stdout, &json(&result))
        }
        Command::FieldEval(c) => {
            let m = ModelConfig::load(&c.config)?;
            let mut text = String::from("i,j,x,y,v1,v2,h11,h12,h22\n");
            for cell in m.grid.cells() {
                let p = m.grid.cell_center(cell);
                let v = m.anisotropy.field().value_at(p);
                let h = m.anisotropy.h_at(p);
                let vals = [p.x, p.y, v[0], v[1], h.xx, h.xy, h.yy].map(fmt_f64);
                let _ = writeln!(text, "{},{},{}", cell.i, cell.j, vals.join(","));
            }
            emit(&c.out, stdout, &text)
        }
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
            } else {
                let _ = write!(stdout, "{e}");
            }
            return code;
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| execute(&cli, stdout)),
            Err(e) => Err(CliError::Config(e.to_string())),
        },
        None => execute(&cli, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"grid": {"A": 3, "B": 3, "M": 3, "N": 3}, "anisotropy": {"gamma": 1}}"#;

    #[test]
    fn minimal_config() {
        let m = ModelConfig::parse(MINIMAL).unwrap().resolve(Path::new(".")).unwrap();
        assert_eq!(m.grid.num_cells(), 9);
        assert_eq!(m.kappa.kappa_sq(), 1.0);
        assert!(m.layout.is_none());
    }

    #[test]
    fn errors_name_the_field() {
        let bad = r#"{"grid": {"A": 3, "B": 3, "M": "x", "N": 3}, "anisotropy": {"gamma": 1}}"#;
        let e = ModelConfig::parse(bad).unwrap_err();
        assert!(e.to_string().contains("grid.M"), "{e}");
        assert_eq!(e.exit_code(), EXIT_CONFIG);
        let unknown = r#"{"grid": {"A": 3, "B": 3, "M": 3, "N": 3}, "anisotropy": {"gamma": 1}, "extra": 1}"#;
        assert!(ModelConfig::parse(unknown).is_err());
        let small = r#"{"grid": {"A": 3, "B": 3, "M": 2, "N": 3}, "anisotropy": {"gamma": 1}}"#;
        assert!(ModelConfig::parse(small).unwrap().resolve(Path::new(".")).is_err());
    }

    #[test]
    fn layouts_parse() {
        let text = r#"{"grid": {"A": 20, "B": 20, "M": 10, "N": 10}, "anisotropy": {"gamma": 1},
            "layout": {"type": "fourier", "frequencies": [[0, 1], [1, 0]]},
            "observation": {"type": "noisy", "noise_precision": 400}}"#;
        let m = ModelConfig::parse(text).unwrap().resolve(Path::new(".")).unwrap();
        assert_eq!(m.layout.as_ref().unwrap().len(), 11);
        assert_eq!(m.theta().unwrap(), vec![1.0; 1].into_iter().chain([0.0; 10]).collect::<Vec<_>>());
        assert!(
            matches!(m.template().unwrap(), ObservationTemplate::Noisy { noise_precision, .. } if noise_precision == 400.0)
        );
        assert!(m.observations().is_err());
    }

    #[test]
    fn cell_argument() {
        assert_eq!(parse_cell("3,4").unwrap(), CellCoord::new(3, 4));
        assert!(parse_cell("3").is_err());
        assert!(parse_cell("a,1").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::NotPositiveDefinite { pivot: 0 }).exit_code(), EXIT_NUMERIC);
        assert_eq!(CliError::from(Error::InvalidSpec("x".into())).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::NotConverged.exit_code(), EXIT_NOT_CONVERGED);
    }
}
