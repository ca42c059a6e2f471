//! Command implementations behind the `gridfeas` binary.

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridfeas::feasibility::{
    certify_from_verdict, lmi_verdict, solve_operating_point_with, BoundaryVertex, ContinuationConfig,
    ContinuationTrace, LmiCertificate,
};
use gridfeas::grid::{build_model_with, validate_connectivity, GridModel, GridSpec, ModelOptions};
use gridfeas::powerflow::{dissipation, enumerate_solutions, p_max, OracleConfig};
use gridfeas::stability::{classify_point, StabilityClass};
use gridfeas::{boundary_scan, DemandVector, Error, FeasibilityVerdict, LmiVerdict};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const EXIT_INVALID_SPEC: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_UNSUPPORTED: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "gridfeas", version, about = "Feasibility analysis of DC grids with constant-power loads")]
pub struct Cli {
    /// Accept grids whose loads split into several connected groups.
    #[arg(long, global = true)]
    pub allow_reducible: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a grid file and print its invariants.
    Validate(GridArg),
    /// Decide feasibility of a demand and print a JSON report.
    Analyze(AnalyzeArgs),
    /// Print the maximal total-power demand and its operating point.
    Pmax(GridArg),
    /// Trace the feasible-set boundary of a two-load grid.
    Boundary(BoundaryArgs),
    /// Print an LMI infeasibility certificate, or the operating point.
    Certify(DemandArgs),
}

#[derive(Debug, Args)]
pub struct GridArg {
    #[arg(long)]
    pub grid: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemandArgs {
    #[arg(long)]
    pub grid: PathBuf,
    /// Comma-separated watts, or `@FILE` holding a JSON array.
    #[arg(long, allow_hyphen_values = true)]
    pub demand: String,
    /// Distance from the end of the demand ray treated as on the boundary.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub demand: DemandArgs,
    /// Include the continuation samples.
    #[arg(long)]
    pub trace: bool,
    /// Compare against brute-force enumeration (at most four loads).
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub rays: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// A failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidSpec(_) | Error::DisconnectedGraph | Error::LoadSubgraphReducible { .. } => {
                EXIT_INVALID_SPEC
            }
            Error::DimensionMismatch { .. }
            | Error::NotTwoLoads { .. }
            | Error::OracleScaleExceeded { .. }
            | Error::InvalidRayCount
            | Error::NonFiniteDemand => EXIT_UNSUPPORTED,
            _ => EXIT_SOLVER,
        };
        Self::new(code, e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::new(EXIT_SOLVER, format!("write failed: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Writes every float as `{:.16e}`, i.e. 17 significant digits.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision);
    value.serialize(&mut ser).expect("report types serialize");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n: usize,
    pub m: usize,
    pub load_ids: Vec<String>,
    pub source_ids: Vec<String>,
    pub y_ll: Vec<Vec<f64>>,
    pub v_star: Vec<f64>,
    pub i_star: Vec<f64>,
    pub p_max: Vec<f64>,
    pub p_max_voltage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictReport {
    Interior {
        voltages: Vec<f64>,
        perron_root: f64,
    },
    Boundary {
        voltages: Vec<f64>,
        lambda: Vec<f64>,
    },
    Infeasible {
        theta_star: f64,
        boundary_demand: Vec<f64>,
        boundary_voltage: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceReport {
    pub lambda: Vec<f64>,
    pub s: f64,
    pub support: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmiVerdictName {
    Pd,
    PsdSingular,
    Indefinite,
}

impl From<LmiVerdict> for LmiVerdictName {
    fn from(v: LmiVerdict) -> Self {
        match v {
            LmiVerdict::PositiveDefinite => Self::Pd,
            LmiVerdict::PsdSingular => Self::PsdSingular,
            LmiVerdict::Indefinite => Self::Indefinite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiReport {
    pub nu: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub verdict: LmiVerdictName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub halfspace: Option<HalfspaceReport>,
    pub lmi: LmiReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityName {
    Stable,
    SemiStableBoundary,
    Unstable,
}

impl From<StabilityClass> for StabilityName {
    fn from(c: StabilityClass) -> Self {
        match c {
            StabilityClass::Stable => Self::Stable,
            StabilityClass::SemiStableBoundary => Self::SemiStableBoundary,
            StabilityClass::Unstable => Self::Unstable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointReport {
    pub voltages: Vec<f64>,
    pub stability: StabilityName,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub full: f64,
    pub reduced: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSampleReport {
    pub theta: f64,
    pub voltage: Vec<f64>,
    pub perron_root: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolutionReport {
    pub voltages: Vec<f64>,
    pub stability: StabilityName,
    pub matches_continuation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub grid: GridSummary,
    pub demand: Vec<f64>,
    pub verdict: VerdictReport,
    pub operating_point: Option<OperatingPointReport>,
    pub dissipation: Option<DissipationReport>,
    pub certificate: Option<CertificateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceSampleReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Vec<OracleSolutionReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmaxReport {
    pub pmax: Vec<f64>,
    pub voltage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexReport {
    pub alpha: f64,
    pub demand: Vec<f64>,
    pub voltage: Vec<f64>,
    pub lambda: Vec<f64>,
    pub perron_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CertifyReport {
    Certificate {
        demand: Vec<f64>,
        #[serde(flatten)]
        lmi: LmiReport,
    },
    Feasible {
        demand: Vec<f64>,
        operating_point: OperatingPointReport,
    },
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != k) {
        return None;
    }
    Some(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
}

fn read_spec(path: &Path) -> CliResult<GridSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_INVALID_SPEC, format!("cannot read {}: {e}", path.display())))?;
    Ok(GridSpec::from_json(&text)?)
}

fn load_model(path: &Path, allow_reducible: bool) -> CliResult<GridModel> {
    let spec = read_spec(path)?;
    let opts = ModelOptions {
        allow_reducible_loads: allow_reducible,
    };
    Ok(build_model_with(&spec, opts)?)
}

/// `LIST` (comma or whitespace separated, optional brackets) or `@FILE`
/// holding a JSON array.
pub fn parse_demand(arg: &str) -> CliResult<DemandVector> {
    let bad = |msg: String| CliError::new(EXIT_UNSUPPORTED, msg);
    let values: Vec<f64> = if let Some(path) = arg.strip_prefix('@') {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {path}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("demand file {path}: {e}")))?
    } else {
        arg.trim()
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("bad demand entry {s:?}: {e}"))))
            .collect::<CliResult<_>>()?
    };
    Ok(DemandVector::from_slice(&values)?)
}

pub fn grid_summary(model: &GridModel) -> GridSummary {
    let pm = p_max(model);
    GridSummary {
        n: model.n(),
        m: model.m(),
        load_ids: model.load_ids().to_vec(),
        source_ids: model.source_ids().to_vec(),
        y_ll: rows_of(model.y_ll()),
        v_star: vec_of(model.v_star()),
        i_star: vec_of(model.i_star()),
        p_max: vec_of(pm.demand.values()),
        p_max_voltage: vec_of(&pm.voltage),
    }
}

fn lmi_report(c: &LmiCertificate) -> LmiReport {
    LmiReport {
        nu: vec_of(&c.nu),
        matrix: rows_of(&c.matrix),
        verdict: c.verdict.into(),
    }
}

fn point_report(model: &GridModel, voltages: &DVector<f64>, demand: &DemandVector) -> CliResult<OperatingPointReport> {
    let residual = (gridfeas::powerflow::demand_unchecked(model, voltages) - demand.values()).amax();
    Ok(OperatingPointReport {
        voltages: vec_of(voltages),
        stability: classify_point(model, voltages)?.into(),
        residual,
    })
}

fn trace_report(trace: &ContinuationTrace) -> Vec<TraceSampleReport> {
    trace
        .samples
        .iter()
        .map(|s| TraceSampleReport {
            theta: s.theta,
            voltage: vec_of(&s.voltage),
            perron_root: s.perron_root,
        })
        .collect()
}

pub fn analyze(model: &GridModel, demand: &DemandVector, tol: f64, trace: bool, oracle: bool) -> CliResult<AnalysisReport> {
    demand.check_len(model.n())?;
    if oracle && model.n() > gridfeas::powerflow::ORACLE_MAX_LOADS {
        return Err(Error::OracleScaleExceeded {
            n: model.n(),
            limit: gridfeas::powerflow::ORACLE_MAX_LOADS,
        }
        .into());
    }
    let cfg = ContinuationConfig {
        boundary_tol: tol,
        ..ContinuationConfig::default()
    };
    let solution = solve_operating_point_with(model, demand, &cfg)?;
    let lmi = certify_from_verdict(model, demand, &solution.verdict)?;

    let (verdict, halfspace) = match &solution.verdict {
        FeasibilityVerdict::Interior { point, perron_root } => (
            VerdictReport::Interior {
                voltages: vec_of(&point.voltages),
                perron_root: *perron_root,
            },
            None,
        ),
        FeasibilityVerdict::Boundary { point, lambda } => (
            VerdictReport::Boundary {
                voltages: vec_of(&point.voltages),
                lambda: vec_of(lambda),
            },
            None,
        ),
        FeasibilityVerdict::Infeasible {
            theta_star,
            boundary_demand,
            boundary_voltage,
            certificate,
        } => (
            VerdictReport::Infeasible {
                theta_star: *theta_star,
                boundary_demand: vec_of(boundary_demand.values()),
                boundary_voltage: vec_of(boundary_voltage),
            },
            Some(HalfspaceReport {
                lambda: vec_of(&certificate.lambda),
                s: certificate.s,
                support: vec_of(certificate.support.values()),
            }),
        ),
    };

    let point = solution.verdict.operating_point();
    let operating_point = point
        .map(|p| point_report(model, &p.voltages, demand))
        .transpose()?;
    let dissipation = point
        .map(|p| dissipation(model, &p.voltages, Some(demand)))
        .transpose()?
        .map(|d| DissipationReport {
            full: d.full,
            reduced: d.reduced.unwrap_or(f64::NAN),
        });
    let certificate = lmi.map(|l| CertificateReport {
        halfspace,
        lmi: lmi_report(&l),
    });

    let oracle = if oracle {
        let found = enumerate_solutions(model, demand, &OracleConfig::default())?;
        let reference = point.map(|p| p.voltages.clone());
        Some(
            found
                .iter()
                .map(|x| {
                    Ok(OracleSolutionReport {
                        voltages: vec_of(x),
                        stability: classify_point(model, x)?.into(),
                        matches_continuation: reference.as_ref().is_some_and(|r| (r - x).amax() <= 1e-6),
                    })
                })
                .collect::<CliResult<Vec<_>>>()?,
        )
    } else {
        None
    };

    Ok(AnalysisReport {
        grid: grid_summary(model),
        demand: vec_of(demand.values()),
        verdict,
        operating_point,
        dissipation,
        certificate,
        trace: trace.then(|| trace_report(&solution.trace)),
        oracle,
    })
}

/// Rechecks a report using only its own contents. Returns the list of
/// violated checks.
pub fn verify_report(report: &AnalysisReport) -> Vec<String> {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    let g = &report.grid;
    let Some(y) = matrix_from_rows(&g.y_ll) else {
        return vec!["y_ll is not rectangular".into()];
    };
    let n = g.n;
    if y.nrows() != n || y.ncols() != n || report.demand.len() != n {
        return vec!["dimension mismatch".into()];
    }
    let v_star = DVector::from_column_slice(&g.v_star);
    let i_star = DVector::from_column_slice(&g.i_star);
    let demand = DVector::from_column_slice(&report.demand);
    let scale = 1.0 + demand.amax();
    check(y == y.transpose(), "y_ll symmetric");
    check(
        (&y * &v_star - &i_star).amax() <= 1e-9 * (1.0 + i_star.amax()),
        "open-circuit voltages solve the load block",
    );
    let p_of = |v: &DVector<f64>| v.component_mul(&(&y * (&v_star - v)));

    match &report.verdict {
        VerdictReport::Interior { voltages, perron_root } => {
            let v = DVector::from_column_slice(voltages);
            check((p_of(&v) - &demand).amax() <= 1e-8 * scale, "interior residual");
            check(*perron_root > 0.0, "interior Perron root positive");
            check(report.certificate.is_none(), "interior has no certificate");
        }
        VerdictReport::Boundary { voltages, lambda } => {
            let v = DVector::from_column_slice(voltages);
            check((p_of(&v) - &demand).amax() <= 1e-8 * scale, "boundary residual");
            check(lambda.iter().all(|&x| x >= 0.0), "boundary normal nonnegative");
        }
        VerdictReport::Infeasible {
            theta_star,
            boundary_demand,
            boundary_voltage,
        } => {
            let b = DVector::from_column_slice(boundary_demand);
            let v = DVector::from_column_slice(boundary_voltage);
            check(*theta_star > 0.0 && *theta_star < 1.0, "theta* in (0, 1)");
            check((&b - &demand * *theta_star).amax() <= 1e-8 * scale, "boundary demand on the ray");
            check((p_of(&v) - &b).amax() <= 1e-8 * scale, "boundary voltage residual");
            match report.certificate.as_ref().and_then(|c| c.halfspace.as_ref()) {
                Some(h) => {
                    let lambda = DVector::from_column_slice(&h.lambda);
                    let support = DVector::from_column_slice(&h.support);
                    check(lambda.dot(&demand) > h.s, "demand violates the half-space");
                    check(
                        (lambda.dot(&support) - h.s).abs() <= 1e-9 * (1.0 + h.s.abs()),
                        "support on the hyperplane",
                    );
                }
                None => check(false, "infeasible verdict carries a half-space"),
            }
        }
    }

    if let Some(c) = &report.certificate {
        let nu = DVector::from_column_slice(&c.lmi.nu);
        match matrix_from_rows(&c.lmi.matrix) {
            Some(m) if m.nrows() == n + 1 && m.ncols() == n + 1 && nu.len() == n => {
                let mut expected = DMatrix::zeros(n + 1, n + 1);
                for i in 0..n {
                    for j in 0..n {
                        expected[(i, j)] = (nu[i] + nu[j]) * y[(i, j)];
                    }
                    expected[(i, n)] = nu[i] * i_star[i];
                    expected[(n, i)] = nu[i] * i_star[i];
                }
                expected[(n, n)] = 2.0 * nu.dot(&demand);
                let gap = (&m - &expected).amax();
                check(gap <= 1e-12 * (1.0 + expected.amax()), "LMI matrix assembly");
                check(nu.iter().all(|&x| x > 0.0), "LMI multiplier positive");
                let recomputed: LmiVerdictName = lmi_verdict(&m).into();
                check(recomputed == c.lmi.verdict, "LMI definiteness");
                let wanted = match report.verdict {
                    VerdictReport::Infeasible { .. } => recomputed == LmiVerdictName::Pd,
                    _ => recomputed != LmiVerdictName::Indefinite,
                };
                check(wanted, "LMI verdict consistent with the feasibility verdict");
            }
            _ => check(false, "LMI matrix shape"),
        }
    }
    failures
}

fn validate(path: &Path, allow_reducible: bool, out: &mut dyn Write) -> CliResult<()> {
    let spec = read_spec(path)?;
    spec.check()?;
    let conn = validate_connectivity(&spec);
    if !conn.connected {
        return Err(Error::DisconnectedGraph.into());
    }
    let load_names = |c: &Vec<usize>| {
        let (loads, _) = spec.ordered_ids();
        c.iter().map(|&i| loads[i].id.clone()).collect::<Vec<_>>().join(", ")
    };
    if !conn.loads_irreducible() {
        let listing: Vec<String> = conn
            .load_components
            .iter()
            .enumerate()
            .map(|(k, c)| format!("  component {k}: {}", load_names(c)))
            .collect();
        if !allow_reducible {
            return Err(CliError::new(
                EXIT_INVALID_SPEC,
                format!("load subgraph is reducible:\n{}", listing.join("\n")),
            ));
        }
        writeln!(out, "load subgraph is reducible (accepted):")?;
        for l in &listing {
            writeln!(out, "{l}")?;
        }
    }
    let model = build_model_with(
        &spec,
        ModelOptions {
            allow_reducible_loads: allow_reducible,
        },
    )?;
    let y = model.y();
    let ones = DVector::from_element(y.nrows(), 1.0);
    writeln!(out, "OK: {} loads, {} sources, {} lines", model.n(), model.m(), spec.lines.len())?;
    writeln!(out, "kirchhoff row sums max |.|: {}", fmt_f64((y * ones).amax()))?;
    writeln!(out, "kirchhoff symmetric: {}", y == &y.transpose())?;
    writeln!(out, "load block positive definite: {}", model.y_ll().clone().cholesky().is_some())?;
    writeln!(out, "v_star: {:?}", vec_of(model.v_star()))?;
    writeln!(out, "i_star: {:?}", vec_of(model.i_star()))?;
    Ok(())
}

fn boundary(model: &GridModel, rays: usize, format: Format, out: &mut dyn Write) -> CliResult<()> {
    if model.n() != 2 {
        return Err(Error::NotTwoLoads { n: model.n() }.into());
    }
    let vertices = boundary_scan(model, rays)?;
    let reports: Vec<VertexReport> = vertices.iter().map(vertex_report).collect();
    match format {
        Format::Json => writeln!(out, "{}", to_json(&reports))?,
        Format::Csv => {
            writeln!(out, "alpha,p1,p2,v1,v2,lambda1,lambda2,perron_residual")?;
            for r in &reports {
                let cols = [
                    r.alpha,
                    r.demand[0],
                    r.demand[1],
                    r.voltage[0],
                    r.voltage[1],
                    r.lambda[0],
                    r.lambda[1],
                    r.perron_residual,
                ];
                let line: Vec<String> = cols.iter().map(|&x| fmt_f64(x)).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
    }
    Ok(())
}

fn vertex_report(v: &BoundaryVertex) -> VertexReport {
    VertexReport {
        alpha: v.alpha,
        demand: vec_of(v.demand.values()),
        voltage: vec_of(&v.voltage),
        lambda: vec_of(&v.lambda),
        perron_residual: v.perron_root.abs(),
    }
}

fn certify(model: &GridModel, demand: &DemandVector, tol: f64) -> CliResult<CertifyReport> {
    demand.check_len(model.n())?;
    let cfg = ContinuationConfig {
        boundary_tol: tol,
        ..ContinuationConfig::default()
    };
    let solution = solve_operating_point_with(model, demand, &cfg)?;
    let values = vec_of(demand.values());
    match certify_from_verdict(model, demand, &solution.verdict)? {
        Some(lmi) => Ok(CertifyReport::Certificate {
            demand: values,
            lmi: lmi_report(&lmi),
        }),
        None => {
            let point = solution
                .verdict
                .operating_point()
                .ok_or_else(|| CliError::new(EXIT_SOLVER, "feasible verdict without operating point"))?;
            Ok(CertifyReport::Feasible {
                demand: values,
                operating_point: point_report(model, &point.voltages, demand)?,
            })
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let allow = cli.allow_reducible;
    match &cli.command {
        Command::Validate(a) => validate(&a.grid, allow, out),
        Command::Analyze(a) => {
            let model = load_model(&a.demand.grid, allow)?;
            let demand = parse_demand(&a.demand.demand)?;
            let report = analyze(&model, &demand, a.demand.tol, a.trace, a.oracle)?;
            writeln!(out, "{}", to_json(&report))?;
            Ok(())
        }
        Command::Pmax(a) => {
            let model = load_model(&a.grid, allow)?;
            let pm = p_max(&model);
            let report = PmaxReport {
                pmax: vec_of(pm.demand.values()),
                voltage: vec_of(&pm.voltage),
            };
            writeln!(out, "{}", to_json(&report))?;
            Ok(())
        }
        Command::Boundary(a) => {
            let model = load_model(&a.grid, allow)?;
            boundary(&model, a.rays, a.format, out)
        }
        Command::Certify(a) => {
            let model = load_model(&a.grid, allow)?;
            let demand = parse_demand(&a.demand)?;
            let report = certify(&model, &demand, a.tol)?;
            writeln!(out, "{}", to_json(&report))?;
            Ok(())
        }
    }
}

/// Sizes the global worker pool from `GRIDFEAS_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("GRIDFEAS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::new(EXIT_UNSUPPORTED, format!("GRIDFEAS_THREADS must be an integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::new(EXIT_SOLVER, e.to_string()))
}
