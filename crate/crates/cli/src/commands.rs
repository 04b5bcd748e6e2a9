use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmpar::io::{load_matrix_auto, save_matrix_auto, write_pgm, RunManifest};
use mmpar::mds::{mds_run, votes_to_dissimilarity, MdsProblem};
use mmpar::mm::rosenbrock::Rosenbrock;
use mmpar::nnmf::{cbcl_preprocess, nnmf_poisson_run, nnmf_run, NnmfProblem};
use mmpar::pet::{
    build_neighborhoods, build_system_matrix, disk_phantom, pet_run, simulate_counts, PetGeometry,
    PetProblem,
};
use mmpar::{run_mm, DenseMatrix, MmTrace};

use crate::args::{
    parse_shape, MdsArgs, NnmfArgs, PetArgs, PhantomArgs, RosenbrockArgs, Shared, SysmatArgs,
};

fn write_outputs(shared: &Shared, trace: &MmTrace, manifest: RunManifest) -> anyhow::Result<()> {
    if let Some(path) = &shared.trace_out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        trace.write_csv(BufWriter::new(file))?;
    }
    if let Some(path) = &shared.manifest_out {
        manifest.write(path)?;
    }
    Ok(())
}

fn report(trace: &MmTrace) {
    println!("iterations: {}", trace.iters);
    println!("converged: {}", trace.converged);
    println!("objective: {:.10}", trace.final_objective());
    println!("seconds: {:.3}", trace.wall_time);
}

fn load(path: &Path) -> anyhow::Result<DenseMatrix> {
    load_matrix_auto(path).with_context(|| format!("reading {}", path.display()))
}

/// Uniform (0, 1) data for benchmarks and smoke tests.
pub fn synthetic_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_da7a);
    DenseMatrix::random_uniform(rows, cols, 0.0, 1.0, &mut rng)
}

pub fn rosenbrock(shared: &Shared, args: &RosenbrockArgs) -> anyhow::Result<()> {
    let config = shared.config();
    let (x, trace) = run_mm(&Rosenbrock, [args.x0, args.y0], &config)?;
    println!("point: {:.12} {:.12}", x[0], x[1]);
    report(&trace);
    let manifest = RunManifest::new("rosenbrock", &config, mmpar::BackendMode::Serial, &trace)
        .with_parameter("x0", args.x0)
        .with_parameter("y0", args.y0);
    write_outputs(shared, &trace, manifest)
}

pub fn nnmf(shared: &Shared, args: &NnmfArgs, poisson: bool) -> anyhow::Result<()> {
    let config = shared.config();
    let backend = shared.make_backend()?;
    let mut data = match (&args.input, &args.synthetic) {
        (Some(path), _) => load(path)?,
        (None, Some(shape)) => {
            let (r, c) = parse_shape(shape)?;
            synthetic_matrix(r, c, shared.seed)
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    if args.preprocess {
        let pre = cbcl_preprocess(&data)?;
        info!("clamped {:.4}% of entries", 100.0 * pre.clamped_fraction);
        data = pre.matrix;
    }
    let problem = NnmfProblem::new(data, args.rank)?;
    let (factors, trace) = if poisson {
        nnmf_poisson_run(&problem, &config, &backend)?
    } else {
        nnmf_run(&problem, &config, &backend)?
    };
    report(&trace);
    if let Some(path) = &args.v_out {
        save_matrix_auto(&factors.v, path)?;
    }
    if let Some(path) = &args.w_out {
        save_matrix_auto(&factors.w, path)?;
    }
    let solver = if poisson { "nnmf-poisson" } else { "nnmf" };
    let mut manifest = RunManifest::new(solver, &config, backend.mode(), &trace)
        .with_parameter("rank", args.rank)
        .with_parameter("preprocess", args.preprocess);
    if let Some(path) = &args.input {
        manifest = manifest.with_input(path)?;
    }
    if let Some(shape) = &args.synthetic {
        manifest = manifest.with_parameter("synthetic", shape.as_str());
    }
    write_outputs(shared, &trace, manifest)
}

/// Counts simulated from the scaled disk phantom.
pub fn simulated_counts(
    e: &DenseMatrix,
    grid: usize,
    scale: f64,
    seed: u64,
    backend: &mmpar::Backend,
) -> anyhow::Result<Vec<f64>> {
    let truth: Vec<f64> = disk_phantom(grid).into_iter().map(|v| v * scale).collect();
    Ok(simulate_counts(&truth, e, seed, backend)?)
}

pub fn pet(shared: &Shared, args: &PetArgs) -> anyhow::Result<()> {
    let config = shared.config();
    let backend = shared.make_backend()?;
    let geometry = PetGeometry::new(args.grid, args.detectors)?;
    let e = match &args.system_matrix {
        Some(path) => load(path)?,
        None => build_system_matrix(&geometry)?,
    };
    let y = match &args.counts {
        Some(path) => load(path)?.into_vec(),
        None => simulated_counts(&e, args.grid, args.intensity_scale, shared.seed, &backend)?,
    };
    info!(
        "{} rays, {} pixels, {} total counts",
        e.rows(),
        e.cols(),
        y.iter().sum::<f64>()
    );
    let problem = PetProblem::new(e, y, args.mu, build_neighborhoods(args.grid))?;
    let (lambda, trace) = pet_run(&problem, &config, &backend)?;
    report(&trace);
    let image = DenseMatrix::from_vec(args.grid, args.grid, lambda)?;
    if let Some(path) = &args.image_out {
        write_pgm(&image, path)?;
    }
    if let Some(path) = &args.lambda_out {
        save_matrix_auto(&image, path)?;
    }
    let mut manifest = RunManifest::new("pet", &config, backend.mode(), &trace)
        .with_parameter("mu", args.mu)
        .with_parameter("grid", args.grid)
        .with_parameter("detectors", args.detectors);
    for path in [&args.system_matrix, &args.counts].into_iter().flatten() {
        manifest = manifest.with_input(path)?;
    }
    if args.counts.is_none() {
        manifest = manifest.with_parameter("intensity_scale", args.intensity_scale);
    }
    write_outputs(shared, &trace, manifest)
}

pub fn mds(shared: &Shared, args: &MdsArgs) -> anyhow::Result<()> {
    let config = shared.config();
    let backend = shared.make_backend()?;
    let (y, input) = match (&args.dissimilarities, &args.votes) {
        (Some(path), _) => (load(path)?, path),
        (None, Some(path)) => (votes_to_dissimilarity(&load(path)?)?, path),
        (None, None) => unreachable!("clap requires one input"),
    };
    let problem = MdsProblem::with_unit_weights(y, args.dim)?;
    let (theta, trace) = mds_run(&problem, &config, !args.no_anchor, &backend)?;
    report(&trace);
    if let Some(path) = &args.coords_out {
        save_matrix_auto(&theta.transpose(), path)?;
    }
    let manifest = RunManifest::new("mds", &config, backend.mode(), &trace)
        .with_parameter("dim", args.dim)
        .with_parameter("anchor", !args.no_anchor)
        .with_input(input)?;
    write_outputs(shared, &trace, manifest)
}

pub fn gen_phantom(args: &PhantomArgs) -> anyhow::Result<()> {
    let image: Vec<f64> = disk_phantom(args.grid)
        .into_iter()
        .map(|v| v * args.intensity_scale)
        .collect();
    let image = DenseMatrix::from_vec(args.grid, args.grid, image)?;
    save_matrix_auto(&image, &args.out)?;
    if let Some(path) = &args.pgm {
        write_pgm(&image, path)?;
    }
    println!("phantom: {0}x{0}", args.grid);
    Ok(())
}

pub fn gen_sysmat(args: &SysmatArgs) -> anyhow::Result<()> {
    let geometry = PetGeometry::new(args.grid, args.detectors)?;
    let e = build_system_matrix(&geometry)?;
    save_matrix_auto(&e, &args.out)?;
    println!("system matrix: {}x{}", e.rows(), e.cols());
    Ok(())
}
