//! The four stages. Each reads the artifacts of the previous ones from the
//! output directory and writes its own.
//!
//! | stage    | writes                                                                              |
//! |----------|-------------------------------------------------------------------------------------|
//! | design   | `design.json`, `coefficients.{csv,txt}`                                             |
//! | quantize | `quantized.json`, `levels.{csv,txt}`, `bits.{csv,txt}`, `payload_<design>.{bin,json}` |
//! | simulate | `simulation.json`, `trajectories.csv`, `errors.csv`, `e2.{csv,txt}`                 |
//! | report   | `report.json`, `summary.{csv,txt}`                                                  |

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sparsecmd_core::channel::{decode_sparse, encode_dense, encode_sparse, quantize, HEADER_BITS};
use sparsecmd_core::simulator::simulate;
use sparsecmd_core::solvers::{eta_to_theta, solve_eta, solve_fista, solve_l2};
use sparsecmd_core::{
    CommandVector, Convention, GramSet, ReferenceData, SimulationGrid, SolveTrace, SparsePayload,
    SplineBasis,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::table::{Cell, Table};

pub const DESIGN_FILE: &str = "design.json";
pub const QUANTIZED_FILE: &str = "quantized.json";
pub const SIMULATION_FILE: &str = "simulation.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_VERSION: u32 = 1;
/// Written into every report so readers know the bit counts come from this
/// tool's own payload layout, not from any standard format.
pub const PAYLOAD_ENCODING: &str = "sparsecmd-v1: 16-bit header (count:8, index width:4, magnitude width:4), then per nonzero a 1-based index, a sign bit and |level|, MSB first, zero-padded to a byte";

/// Names used for files and CSV columns, in table order.
pub const DESIGNS: [&str; 3] = ["theta2", "theta_sparse", "eta_sparse"];

/// Solver trace without the per-iteration history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub step_constant: f64,
    pub objective_first: f64,
    pub objective_last: f64,
}

impl From<&SolveTrace> for TraceSummary {
    fn from(t: &SolveTrace) -> Self {
        Self {
            iterations: t.iterations,
            converged: t.converged,
            kkt_residual: t.kkt_residual,
            step_constant: t.step_constant,
            objective_first: t.objective_history.first().copied().unwrap_or(f64::NAN),
            objective_last: t.objective_history.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub name: String,
    pub vector: CommandVector,
    pub trace: Option<TraceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignArtifact {
    pub reference: ReferenceData,
    pub designs: Vec<DesignRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedRecord {
    pub name: String,
    pub quantized: Vec<f64>,
    pub nonzeros: usize,
    pub bits_used: usize,
    /// Size of the slot-per-entry encoding, when the header can describe it.
    pub dense_bits: Option<usize>,
    pub payload_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedArtifact {
    pub step: f64,
    pub quantized_reference: Vec<f64>,
    pub designs: Vec<QuantizedRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDesign {
    pub name: String,
    pub e2_raw: f64,
    pub e2_quantized: f64,
    pub errors_raw: Vec<f64>,
    pub errors_quantized: Vec<f64>,
    /// `max_i |y(t_i) − [Gθ]_i|` over both variants; an integration check.
    pub sample_identity_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationArtifact {
    pub grid_steps: usize,
    pub grid_nodes: usize,
    pub instants: Vec<f64>,
    pub designs: Vec<SimulatedDesign>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDesign {
    pub name: String,
    pub convention: Convention,
    pub solver: sparsecmd_core::SolverKind,
    pub coefficients: Vec<f64>,
    pub support_size: usize,
    pub quantized: Vec<f64>,
    pub quantized_support_size: usize,
    pub bits_used: usize,
    pub dense_bits: Option<usize>,
    pub e2_raw: f64,
    pub e2_quantized: f64,
    pub trace: Option<TraceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub config: ExperimentConfig,
    pub reference: ReferenceData,
    pub header_bits: usize,
    pub encoding: String,
    pub grid_nodes: usize,
    pub designs: Vec<ReportDesign>,
}

/// What a stage produced: files written and the tables to show the user.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub files: Vec<PathBuf>,
    pub tables: Vec<(String, Table)>,
}

impl StageOutput {
    pub fn render(&self) -> String {
        self.tables
            .iter()
            .map(|(title, t)| format!("{title}\n{}", t.to_text()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

struct Context {
    basis: SplineBasis,
    gram: GramSet,
}

fn context(cfg: &ExperimentConfig) -> CliResult<Context> {
    let reference = cfg.reference.build().map_err(CliError::config)?;
    let basis = SplineBasis::new(cfg.plant.clone(), reference).map_err(CliError::config)?;
    let gram = basis.gram_matrix().map_err(CliError::config)?;
    Ok(Context { basis, gram })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::MissingArtifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::MissingArtifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn write(out: &mut StageOutput, path: PathBuf, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(&path, bytes).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    out.files.push(path);
    Ok(())
}

fn write_json<T: Serialize>(out: &mut StageOutput, path: PathBuf, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write(out, path, text)
}

fn write_table(
    out: &mut StageOutput,
    dir: &Path,
    stem: &str,
    title: &str,
    table: Table,
) -> CliResult<()> {
    write(out, dir.join(format!("{stem}.csv")), table.to_csv())?;
    write(out, dir.join(format!("{stem}.txt")), table.to_text())?;
    out.tables.push((title.to_string(), table));
    Ok(())
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn check_lengths(artifact: &DesignArtifact, ctx: &Context, path: &Path) -> CliResult<()> {
    let n = ctx.basis.len();
    if artifact.designs.len() != DESIGNS.len()
        || artifact
            .designs
            .iter()
            .zip(DESIGNS)
            .any(|(d, name)| d.name != name || d.vector.len() != n)
    {
        return Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
            reason: format!("does not hold the three designs of length {n} for this config"),
        });
    }
    Ok(())
}

fn load_designs(cfg: &ExperimentConfig, dir: &Path) -> CliResult<(Context, DesignArtifact)> {
    let path = dir.join(DESIGN_FILE);
    let artifact: DesignArtifact = read_json(&path)?;
    let ctx = context(cfg)?;
    check_lengths(&artifact, &ctx, &path)?;
    Ok((ctx, artifact))
}

/// Runs the three designs. On non-convergence the artifacts are still
/// written, with `converged: false`, before the error is returned.
pub fn design(cfg: &ExperimentConfig, dir: &Path) -> CliResult<StageOutput> {
    cfg.check()?;
    let ctx = context(cfg)?;
    let y = ctx.basis.reference().values();
    let s = &cfg.solver;
    let theta2 = solve_l2(&ctx.gram, y, s.mu)?;
    let (sparse, trace) = solve_fista(ctx.gram.phi(), y, s)?;
    let eta = solve_eta(y, s.nu)?;

    let mut table = Table::new(["i", "theta2", "theta_sparse", "eta_sparse", "y_ref"]);
    for (i, &yi) in y.iter().enumerate() {
        table.push(vec![
            (i + 1).into(),
            theta2.coefficients[i].into(),
            sparse.coefficients[i].into(),
            eta.coefficients[i].into(),
            yi.into(),
        ]);
    }
    let artifact = DesignArtifact {
        reference: ctx.basis.reference().clone(),
        designs: vec![
            DesignRecord {
                name: DESIGNS[0].into(),
                vector: theta2,
                trace: None,
            },
            DesignRecord {
                name: DESIGNS[1].into(),
                vector: sparse,
                trace: Some((&trace).into()),
            },
            DesignRecord {
                name: DESIGNS[2].into(),
                vector: eta,
                trace: None,
            },
        ],
    };
    ensure_dir(dir)?;
    let mut out = StageOutput::default();
    write_json(&mut out, dir.join(DESIGN_FILE), &artifact)?;
    write_table(&mut out, dir, "coefficients", "Designed vectors", table)?;
    if !trace.converged {
        return Err(CliError::NonConvergence(format!(
            "FISTA stopped after {} iterations with KKT residual {:e}; partial results in {}",
            trace.iterations,
            trace.kkt_residual,
            dir.display()
        )));
    }
    Ok(out)
}

pub fn payload_file(name: &str) -> String {
    format!("payload_{name}.bin")
}

pub fn quantize_stage(cfg: &ExperimentConfig, dir: &Path) -> CliResult<StageOutput> {
    let (ctx, artifact) = load_designs(cfg, dir)?;
    let q = &cfg.quantizer;
    let y = ctx.basis.reference().values();
    let mut out = StageOutput::default();
    let mut records = Vec::new();
    for d in &artifact.designs {
        let quantized = quantize(&d.vector.coefficients, q);
        let payload = encode_sparse(&quantized, q)?;
        let dense_bits = encode_dense(&quantized, q).ok().map(|p| p.bits_used);
        let file = payload_file(&d.name);
        write(&mut out, dir.join(&file), payload.to_bytes())?;
        write_json(
            &mut out,
            dir.join(format!("payload_{}.json", d.name)),
            &payload,
        )?;
        records.push(QuantizedRecord {
            name: d.name.clone(),
            nonzeros: payload.nonzeros(),
            bits_used: payload.bits_used,
            quantized,
            dense_bits,
            payload_file: file,
        });
    }
    let quantized_reference = quantize(y, q);

    let mut t2 = Table::new([
        "i",
        "Q(theta2)",
        "Q(theta_sparse)",
        "Q(eta_sparse)",
        "Q(y_ref)",
    ]);
    for (i, &qy) in quantized_reference.iter().enumerate() {
        let mut row: Vec<Cell> = vec![(i + 1).into()];
        row.extend(records.iter().map(|r| Cell::from(r.quantized[i])));
        row.push(qy.into());
        t2.push(row);
    }
    let mut bits = Table::new(["design", "nonzeros", "sparse_bits", "dense_bits"]);
    for r in &records {
        bits.push(vec![
            r.name.as_str().into(),
            r.nonzeros.into(),
            r.bits_used.into(),
            r.dense_bits.into(),
        ]);
    }
    let artifact = QuantizedArtifact {
        step: q.step(),
        quantized_reference,
        designs: records,
    };
    write_json(&mut out, dir.join(QUANTIZED_FILE), &artifact)?;
    write_table(
        &mut out,
        dir,
        "levels",
        &format!("Quantized vectors (step {})", q.step()),
        t2,
    )?;
    write_table(&mut out, dir, "bits", "Payload sizes (bits)", bits)?;
    Ok(out)
}

/// Reads a payload byte file back into coefficients, as the receiver would.
fn receive(cfg: &ExperimentConfig, dir: &Path, name: &str, length: usize) -> CliResult<Vec<f64>> {
    let path = dir.join(payload_file(name));
    let bytes = fs::read(&path).map_err(|e| CliError::MissingArtifact {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let payload =
        SparsePayload::from_bytes(&bytes, length).map_err(|e| CliError::MissingArtifact {
            path: path.clone(),
            reason: e.to_string(),
        })?;
    Ok(decode_sparse(&payload, &cfg.quantizer)?)
}

pub fn simulate_stage(cfg: &ExperimentConfig, dir: &Path) -> CliResult<StageOutput> {
    let (ctx, artifact) = load_designs(cfg, dir)?;
    let grid = SimulationGrid::for_basis(&ctx.basis, cfg.grid_steps).map_err(CliError::config)?;
    let n = ctx.basis.len();

    let mut runs = Vec::new();
    for d in &artifact.designs {
        let received = d.vector.with_coefficients(receive(cfg, dir, &d.name, n)?);
        for (variant, vector) in [
            (d.name.clone(), d.vector.clone()),
            (format!("{}_q", d.name), received),
        ] {
            let theta = match vector.convention {
                Convention::Eta => eta_to_theta(&vector, &ctx.gram)?,
                Convention::Theta => vector,
            };
            let result = simulate(&ctx.basis, &theta, &grid)?;
            let gt = ctx.gram.g().matvec(&theta.coefficients);
            let gap = result
                .outputs_at_instants()
                .iter()
                .zip(&gt)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            runs.push((variant, result, gap));
        }
    }

    let mut traj_headers = vec!["time".to_string()];
    for (name, ..) in &runs {
        traj_headers.push(format!("u_{name}"));
        traj_headers.push(format!("y_{name}"));
    }
    let mut traj = Table::new(traj_headers);
    let times = &runs[0].1.times;
    for (k, &t) in times.iter().enumerate() {
        let mut row: Vec<Cell> = vec![t.into()];
        for (_, r, _) in &runs {
            row.push(r.u[k].into());
            row.push(r.y[k].into());
        }
        traj.push(row);
    }
    let instants = ctx.basis.reference().instants().to_vec();
    let mut errs = Table::new(
        std::iter::once("time".to_string()).chain(runs.iter().map(|r| format!("err_{}", r.0))),
    );
    for (i, &t) in instants.iter().enumerate() {
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend(
            runs.iter()
                .map(|(_, r, _)| Cell::from(r.error_at_instants[i].1)),
        );
        errs.push(row);
    }

    let mut e2 = Table::new(["design", "e2_raw", "e2_quantized", "increase"]);
    let mut designs = Vec::new();
    for (d, pair) in artifact.designs.iter().zip(runs.chunks(2)) {
        let (raw, quant) = (&pair[0].1, &pair[1].1);
        e2.push(vec![
            d.name.as_str().into(),
            raw.e2.into(),
            quant.e2.into(),
            (quant.e2 - raw.e2).into(),
        ]);
        designs.push(SimulatedDesign {
            name: d.name.clone(),
            e2_raw: raw.e2,
            e2_quantized: quant.e2,
            errors_raw: raw.error_at_instants.iter().map(|e| e.1).collect(),
            errors_quantized: quant.error_at_instants.iter().map(|e| e.1).collect(),
            sample_identity_gap: pair[0].2.max(pair[1].2),
        });
    }

    let mut out = StageOutput::default();
    write(&mut out, dir.join("trajectories.csv"), traj.to_csv())?;
    write(&mut out, dir.join("errors.csv"), errs.to_csv())?;
    write_table(
        &mut out,
        dir,
        "e2",
        "Squared tracking error at the sampling instants",
        e2,
    )?;
    let artifact = SimulationArtifact {
        grid_steps: cfg.grid_steps,
        grid_nodes: grid.nodes().len(),
        instants,
        designs,
    };
    write_json(&mut out, dir.join(SIMULATION_FILE), &artifact)?;
    Ok(out)
}

pub fn build_report(cfg: &ExperimentConfig, dir: &Path) -> CliResult<Report> {
    let (_, designs) = load_designs(cfg, dir)?;
    let quantized: QuantizedArtifact = read_json(&dir.join(QUANTIZED_FILE))?;
    let simulated: SimulationArtifact = read_json(&dir.join(SIMULATION_FILE))?;
    let stale = |file: &str| CliError::MissingArtifact {
        path: dir.join(file),
        reason: "does not match design.json; rerun the stage".into(),
    };
    if quantized.designs.len() != designs.designs.len() {
        return Err(stale(QUANTIZED_FILE));
    }
    if simulated.designs.len() != designs.designs.len() {
        return Err(stale(SIMULATION_FILE));
    }
    let mut out = Vec::new();
    for ((d, q), s) in designs
        .designs
        .iter()
        .zip(&quantized.designs)
        .zip(&simulated.designs)
    {
        if q.name != d.name || q.quantized.len() != d.vector.len() {
            return Err(stale(QUANTIZED_FILE));
        }
        if s.name != d.name {
            return Err(stale(SIMULATION_FILE));
        }
        out.push(ReportDesign {
            name: d.name.clone(),
            convention: d.vector.convention,
            solver: d.vector.solver,
            coefficients: d.vector.coefficients.clone(),
            support_size: d.vector.support_size(),
            quantized: q.quantized.clone(),
            quantized_support_size: q.nonzeros,
            bits_used: q.bits_used,
            dense_bits: q.dense_bits,
            e2_raw: s.e2_raw,
            e2_quantized: s.e2_quantized,
            trace: d.trace.clone(),
        });
    }
    let mut config = cfg.clone();
    config.output_dir = None;
    Ok(Report {
        version: REPORT_VERSION,
        config,
        reference: designs.reference,
        header_bits: HEADER_BITS,
        encoding: PAYLOAD_ENCODING.into(),
        grid_nodes: simulated.grid_nodes,
        designs: out,
    })
}

pub fn report_stage(cfg: &ExperimentConfig, dir: &Path) -> CliResult<StageOutput> {
    let report = build_report(cfg, dir)?;
    let mut summary = Table::new([
        "design",
        "support",
        "q_support",
        "bits",
        "e2_raw",
        "e2_quantized",
    ]);
    for d in &report.designs {
        summary.push(vec![
            d.name.as_str().into(),
            d.support_size.into(),
            d.quantized_support_size.into(),
            d.bits_used.into(),
            d.e2_raw.into(),
            d.e2_quantized.into(),
        ]);
    }
    let mut out = StageOutput::default();
    write_json(&mut out, dir.join(REPORT_FILE), &report)?;
    write_table(&mut out, dir, "summary", "Summary", summary)?;
    Ok(out)
}

/// All four stages in order.
pub fn run_all(cfg: &ExperimentConfig, dir: &Path) -> CliResult<StageOutput> {
    let mut out = design(cfg, dir)?;
    for stage in [quantize_stage, simulate_stage, report_stage] {
        let next = stage(cfg, dir)?;
        out.files.extend(next.files);
        out.tables.extend(next.tables);
    }
    Ok(out)
}
