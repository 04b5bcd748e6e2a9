use std::fs::File;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mmpar::mds::{mds_run, votes_to_dissimilarity, MdsProblem};
use mmpar::nnmf::{nnmf_run, NnmfProblem};
use mmpar::pet::{build_system_matrix, pet_run, PetGeometry, PetProblem};
use mmpar::{Backend, DenseMatrix, MmConfig, MmTrace};

use crate::args::{parse_shape, BenchArgs, Shared, Suite};
use crate::commands::{simulated_counts, synthetic_matrix};
use crate::InvariantViolation;

/// Single-core CPU objective values published for the full-size datasets
/// (CBCL faces, simulated PET, House roll calls). Kept for scale only.
const NNMF_REFERENCE: &[(f64, f64)] = &[
    (10.0, 106.2653503),
    (20.0, 89.56601262),
    (30.0, 78.42143486),
    (40.0, 70.05415929),
    (50.0, 63.51429261),
    (60.0, 58.24854375),
];
const PET_REFERENCE: &[(f64, f64)] = &[
    (0.0, -7337.152765),
    (1e-7, -8500.083033),
    (1e-6, -15432.45496),
    (1e-5, -55767.32966),
];
const MDS_REFERENCE: &[(f64, f64)] = &[
    (2.0, 198.5109307),
    (3.0, 95.55987770),
    (4.0, 56.83482075),
    (5.0, 39.41268434),
    (10.0, 14.16083986),
    (20.0, 6.464623901),
    (30.0, 4.839570118),
];

#[derive(Debug, Clone)]
pub struct Row {
    pub param: f64,
    pub iters: usize,
    pub converged: bool,
    pub serial_seconds: f64,
    pub parallel_seconds: f64,
    pub objective: f64,
    pub reference: Option<f64>,
}

impl Row {
    pub fn speedup(&self) -> f64 {
        self.serial_seconds / self.parallel_seconds.max(1e-12)
    }
}

fn lookup(table: &[(f64, f64)], param: f64) -> Option<f64> {
    table.iter().find(|(p, _)| *p == param).map(|(_, v)| *v)
}

fn as_count(v: f64, what: &str) -> anyhow::Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(
            mmpar::Error::InvalidInput(format!("{what} must be a positive integer, got {v}"))
                .into(),
        )
    }
}

/// Runs `solve` once per backend and insists the traces agree bit for bit.
fn compare<F>(
    param: f64,
    parallel: &Backend,
    reference: Option<f64>,
    solve: F,
) -> anyhow::Result<Row>
where
    F: Fn(&Backend) -> mmpar::Result<MmTrace>,
{
    let serial = solve(&Backend::serial())?;
    let par = solve(parallel)?;
    let same = serial.objective_values.len() == par.objective_values.len()
        && serial
            .objective_values
            .iter()
            .zip(&par.objective_values)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    if !same {
        return Err(InvariantViolation(format!(
            "serial and parallel objective traces differ at parameter {param}"
        ))
        .into());
    }
    Ok(Row {
        param,
        iters: serial.iters,
        converged: serial.converged,
        serial_seconds: serial.wall_time,
        parallel_seconds: par.wall_time,
        objective: serial.final_objective(),
        reference,
    })
}

/// Synthetic roll calls: two blocs with noisy one-dimensional ideal points.
pub fn simulated_votes(objects: usize, calls: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ideal: Vec<f64> = (0..objects)
        .map(|i| if i % 2 == 0 { -0.6 } else { 0.6 } + rng.gen_range(-0.5..0.5))
        .collect();
    let cuts: Vec<f64> = (0..calls).map(|_| rng.gen_range(-1.2..1.2)).collect();
    let mut votes = DenseMatrix::zeros(objects, calls);
    for (i, x) in ideal.iter().enumerate() {
        for (j, c) in cuts.iter().enumerate() {
            let r: f64 = rng.gen();
            votes[(i, j)] = if r < 0.05 {
                0.0
            } else if (x - c + rng.gen_range(-0.3..0.3)) > 0.0 {
                1.0
            } else {
                -1.0
            };
        }
    }
    votes
}

pub fn rows(shared: &Shared, args: &BenchArgs) -> anyhow::Result<Vec<Row>> {
    let config: MmConfig = shared.config();
    let parallel = Backend::parallel(shared.thread_count())?;
    let mut out = Vec::new();
    match args.suite {
        Suite::Nnmf => {
            let (r, c) = parse_shape(&args.shape)?;
            let x = synthetic_matrix(r, c, shared.seed);
            for &param in args.grid.as_deref().unwrap_or(&[10.0, 20.0, 30.0]) {
                let problem = NnmfProblem::new(x.clone(), as_count(param, "rank")?)?;
                out.push(compare(
                    param,
                    &parallel,
                    lookup(NNMF_REFERENCE, param),
                    |b| nnmf_run(&problem, &config, b).map(|r| r.1),
                )?);
            }
        }
        Suite::Pet => {
            let geometry = PetGeometry::new(args.pet_grid, args.detectors)?;
            let e = build_system_matrix(&geometry)?;
            let y = simulated_counts(&e, args.pet_grid, 1000.0, shared.seed, &Backend::serial())?;
            let base = PetProblem::new(e, y, 0.0, mmpar::pet::build_neighborhoods(args.pet_grid))?;
            for &param in args.grid.as_deref().unwrap_or(&[0.0, 1e-7, 1e-6, 1e-5]) {
                let problem = base.with_mu(param)?;
                out.push(compare(
                    param,
                    &parallel,
                    lookup(PET_REFERENCE, param),
                    |b| pet_run(&problem, &config, b).map(|r| r.1),
                )?);
            }
        }
        Suite::Mds => {
            let votes = simulated_votes(args.objects, 4 * args.objects, shared.seed);
            let y = votes_to_dissimilarity(&votes)?;
            let base = MdsProblem::with_unit_weights(y, 1)?;
            for &param in args.grid.as_deref().unwrap_or(&[2.0, 3.0, 4.0, 5.0]) {
                let problem = base.with_dim(as_count(param, "dimension")?)?;
                out.push(compare(
                    param,
                    &parallel,
                    lookup(MDS_REFERENCE, param),
                    |b| mds_run(&problem, &config, false, b).map(|r| r.1),
                )?);
            }
        }
    }
    Ok(out)
}

fn param_name(suite: Suite) -> &'static str {
    match suite {
        Suite::Nnmf => "rank",
        Suite::Pet => "mu",
        Suite::Mds => "dim",
    }
}

fn fmt_ref(r: Option<f64>) -> String {
    r.map_or_else(|| "-".to_string(), |v| format!("{v}"))
}

pub fn write_csv<W: Write>(suite: Suite, rows: &[Row], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "{},iters,converged,serial_seconds,parallel_seconds,speedup,objective,reference_objective",
        param_name(suite)
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.param,
            r.iters,
            r.converged,
            r.serial_seconds,
            r.parallel_seconds,
            r.speedup(),
            r.objective,
            r.reference.map_or_else(String::new, |v| v.to_string())
        )?;
    }
    Ok(())
}

pub fn run(shared: &Shared, args: &BenchArgs) -> anyhow::Result<()> {
    let rows = rows(shared, args)?;
    println!(
        "{:>8} {:>8} {:>9} {:>10} {:>10} {:>8} {:>18} {:>14}",
        param_name(args.suite),
        "iters",
        "converged",
        "serial_s",
        "parallel_s",
        "speedup",
        "objective",
        "reference"
    );
    for r in &rows {
        println!(
            "{:>8} {:>8} {:>9} {:>10.3} {:>10.3} {:>8.2} {:>18.10} {:>14}",
            r.param,
            r.iters,
            r.converged,
            r.serial_seconds,
            r.parallel_seconds,
            r.speedup(),
            r.objective,
            fmt_ref(r.reference)
        );
    }
    println!(
        "serial and parallel traces identical: yes ({} threads)",
        shared.thread_count()
    );
    if let Some(path) = &args.csv_out {
        write_csv(args.suite, &rows, File::create(path)?)?;
    }
    Ok(())
}
