use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use eit::harness::{self, ExperimentConfig, Exporter, HarnessError, Method};
use eit::interpolate;

/// Difference EIT on the unit disk: simulation, interpolation of
/// current-driven electrode data, and monotonicity-based reconstruction.
#[derive(Parser)]
#[command(name = "eit", version)]
struct Cli {
    /// Key=value config file; CLI flags override individual keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative noise level delta (e.g. 0.001 for 0.1%).
    #[arg(long, global = true)]
    noise: Option<f64>,
    /// Support-bound radius in (0,1); repeatable.
    #[arg(long = "radius", global = true)]
    radii: Vec<f64>,
    /// Interpolation method (linear | geometric); repeatable.
    #[arg(long = "method", global = true)]
    methods: Vec<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the phantom's difference measurement matrix.
    Simulate,
    /// Mask the current-driven entries and interpolate them.
    Interpolate,
    /// Monotonicity reconstruction at a single noise level.
    Reconstruct,
    /// Interpolation-error table over the configured electrode counts.
    Table1,
    /// Indicator panels: full data vs. interpolated, per noise level.
    Figure4,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut config = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        config.apply_text(&std::fs::read_to_string(path)?)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(noise) = cli.noise {
        config.delta = noise;
        config.figure_deltas = vec![noise];
    }
    if !cli.radii.is_empty() {
        config.radii = cli.radii.clone();
    }
    if !cli.methods.is_empty() {
        config.methods = cli
            .methods
            .iter()
            .map(|s| Method::from_str(s))
            .collect::<Result<_, _>>()?;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

fn cmd_simulate(config: &ExperimentConfig) -> Result<(), HarnessError> {
    let m = *config.ms.iter().max().expect("validated nonempty");
    let scene = harness::build_scene(config, m)?;
    let mut exporter = Exporter::new(&config.out_dir)?;
    exporter.write("config.txt", config.echo().as_bytes())?;
    exporter.write(
        "forward_mesh.txt",
        scene.forward_mesh.to_text(Some(&scene.forward_layout)).as_bytes(),
    )?;
    exporter.write(
        "recon_mesh.txt",
        scene.recon_mesh.to_text(Some(&scene.recon_layout)).as_bytes(),
    )?;
    exporter.write("v_true.csv", scene.v_true.to_csv().as_bytes())?;
    exporter.write("v_true.mask.csv", scene.v_true.mask_to_csv().as_bytes())?;
    exporter.write("sensitivity.csv", scene.sensitivity.to_csv().as_bytes())?;
    let hash = exporter.finish()?;
    println!(
        "simulated m={m} phantom={}: |V|_F = {:.6e}, manifest {hash}",
        config.phantom,
        scene.v_true.frobenius()
    );
    Ok(())
}

fn cmd_interpolate(config: &ExperimentConfig) -> Result<(), HarnessError> {
    let m = *config.ms.iter().max().expect("validated nonempty");
    let scene = harness::build_scene(config, m)?;
    let masked = interpolate::mask_current_driven(&scene.v_true);
    let mut exporter = Exporter::new(&config.out_dir)?;
    exporter.write("config.txt", config.echo().as_bytes())?;
    exporter.write("v_masked.csv", masked.to_csv().as_bytes())?;
    exporter.write("v_masked.mask.csv", masked.mask_to_csv().as_bytes())?;
    for (label, filled) in harness::interpolate_all(&scene, config, &masked)? {
        let err = interpolate::interpolation_error(&scene.v_true, &filled)?;
        let stem = sanitize(&label);
        exporter.write(&format!("v_{stem}.csv"), filled.to_csv().as_bytes())?;
        exporter.write(&format!("v_{stem}.mask.csv"), filled.mask_to_csv().as_bytes())?;
        println!("{label}: relative error {:.4}%", 100.0 * err);
    }
    exporter.finish()?;
    Ok(())
}

fn cmd_reconstruct(config: &ExperimentConfig) -> Result<(), HarnessError> {
    let mut single = config.clone();
    single.figure_deltas = vec![config.delta];
    run_panels(&single)
}

fn cmd_figure4(config: &ExperimentConfig) -> Result<(), HarnessError> {
    run_panels(config)
}

fn run_panels(config: &ExperimentConfig) -> Result<(), HarnessError> {
    let run = harness::run_reconstruction_figure(config)?;
    let mut exporter = Exporter::new(&config.out_dir)?;
    exporter.write("config.txt", config.echo().as_bytes())?;
    for panel in &run.panels {
        let stem = format!("delta{}_{}", panel.delta, sanitize(&panel.label));
        exporter.write(&format!("indicator_{stem}.csv"), panel.field.to_csv().as_bytes())?;
        exporter.write(&format!("render_{stem}.svg"), panel.svg.as_bytes())?;
        let centroids =
            harness::centroids_above_threshold(&panel.field, &run.scene.recon_mesh, &run.scene.partition);
        match &panel.note {
            Some(note) => println!("delta={} {}: {note}", panel.delta, panel.label),
            None => println!(
                "delta={} {}: overlap {:.1}%, Jaccard {:.3}, {centroids}/3 centroids above threshold",
                panel.delta,
                panel.label,
                100.0 * panel.overlap_with_full,
                panel.jaccard_with_full
            ),
        }
    }
    let hash = exporter.finish()?;
    println!("m={}, manifest {hash}", run.m);
    Ok(())
}

fn cmd_table1(config: &ExperimentConfig) -> Result<(), HarnessError> {
    let table = harness::run_table1(config)?;
    let mut exporter = Exporter::new(&config.out_dir)?;
    exporter.write("config.txt", config.echo().as_bytes())?;
    exporter.write("table1.csv", table.to_csv().as_bytes())?;
    let hash = exporter.finish()?;
    print!("{}", table.to_csv());
    println!("manifest {hash}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = build_config(&cli).and_then(|config| match cli.command {
        Command::Simulate => cmd_simulate(&config),
        Command::Interpolate => cmd_interpolate(&config),
        Command::Reconstruct => cmd_reconstruct(&config),
        Command::Table1 => cmd_table1(&config),
        Command::Figure4 => cmd_figure4(&config),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
