//! Configuration-driven command line front end.
//!
//! Subcommands: solve-full, solve-limit, sweep, effective, check, mesh-dump.
//! Exit codes: 0 success, 1 validation error (with the violated admissibility
//! clause named), 2 solver failure.

use porofrac::study::fnv1a;
use porofrac::{
    build_limit_problem, build_mesh, compute_effective, run_sweep, solve_limit, solve_transient,
    validate_exponents, Error, RunConfig,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

struct Args {
    command: String,
    config: PathBuf,
    out: PathBuf,
    jobs: usize,
    slow: bool,
}

const USAGE: &str =
    "usage: porofrac <solve-full|solve-limit|sweep|effective|check|mesh-dump|example> \
--config <file.json> [--out <dir>] [--jobs <n>] [--slow]";

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let command = argv.next().ok_or(USAGE.to_string())?;
    let mut config = None;
    let mut out = PathBuf::from("out");
    let mut jobs = 1usize;
    let mut slow = false;
    while let Some(flag) = argv.next() {
        match flag.as_str() {
            "--config" => {
                config = Some(PathBuf::from(argv.next().ok_or("--config needs a path")?));
            }
            "--out" => out = PathBuf::from(argv.next().ok_or("--out needs a path")?),
            "--jobs" => {
                jobs = argv
                    .next()
                    .ok_or("--jobs needs a count")?
                    .parse()
                    .map_err(|_| "--jobs needs an integer".to_string())?;
            }
            "--slow" => slow = true,
            other => return Err(format!("unknown flag '{other}'\n{USAGE}")),
        }
    }
    let config = config.ok_or(format!("missing --config\n{USAGE}"))?;
    Ok(Args {
        command,
        config,
        out,
        jobs,
        slow,
    })
}

fn write(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)
}

fn dump_solution(
    out: &Path,
    prefix: &str,
    mesh: &porofrac::FracturedMesh,
    sol: &porofrac::TransientSolution,
    config_json: &str,
) -> std::io::Result<()> {
    let mut manifest = String::from("level,time,file\n");
    for k in 0..sol.times.len() {
        let file = format!("{prefix}_{k:04}.csv");
        write(&out.join(&file), &sol.level_csv(mesh, k))?;
        manifest.push_str(&format!("{},{:.16e},{}\n", k, sol.times[k], file));
    }
    manifest.push_str(&format!("# epsilon,{}\n", sol.epsilon.label()));
    manifest.push_str(&format!(
        "# config_hash,{:016x}\n",
        fnv1a(config_json.as_bytes())
    ));
    write(&out.join(format!("{prefix}_manifest.csv")), &manifest)
}

fn run(args: &Args) -> Result<(), (u8, String)> {
    if args.command == "example" {
        let cfg = RunConfig::example("1", "-1");
        write(&args.config, &cfg.to_json()).map_err(|e| (2u8, e.to_string()))?;
        println!("wrote example config to {}", args.config.display());
        return Ok(());
    }

    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| (1u8, format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = RunConfig::from_json(&text).map_err(|e| (1u8, e.to_string()))?;
    let geometry = cfg.geometry();
    let exponents = cfg.exponents();
    let materials = cfg.materials();

    let validation = |e: Error| (1u8, e.to_string());
    let solver_err = |e: Error| (2u8, e.to_string());

    // config echo
    write(&args.out.join("config_echo.json"), &cfg.to_json()).map_err(|e| (2, e.to_string()))?;

    match args.command.as_str() {
        "mesh-dump" => {
            let mesh = build_mesh(&geometry, cfg.discretization.h).map_err(validation)?;
            write(&args.out.join("mesh.txt"), &mesh.dump_text()).map_err(|e| (2, e.to_string()))?;
            println!(
                "mesh: {} vertices, {} triangles",
                mesh.n_vertices(),
                mesh.n_triangles()
            );
        }
        "effective" => {
            let regime = validate_exponents(&exponents, &geometry).map_err(validation)?;
            let mesh = build_mesh(&geometry, cfg.discretization.h).map_err(validation)?;
            let eff =
                compute_effective(&materials, &exponents, &regime, &mesh).map_err(validation)?;
            write(&args.out.join("effective.csv"), &eff.to_csv())
                .map_err(|e| (2, e.to_string()))?;
            println!(
                "effective parameters written for {} gamma stations",
                mesh.n_stations()
            );
        }
        "solve-full" => {
            validate_exponents(&exponents, &geometry).map_err(validation)?;
            let run = cfg.biot_run().map_err(validation)?;
            let mesh = build_mesh(&geometry, cfg.discretization.h).map_err(validation)?;
            let sol = solve_transient(&mesh, &run).map_err(solver_err)?;
            dump_solution(&args.out, "full", &mesh, &sol, &cfg.to_json())
                .map_err(|e| (2, e.to_string()))?;
            println!("full solve: {} time levels", sol.times.len());
        }
        "solve-limit" => {
            let regime = validate_exponents(&exponents, &geometry).map_err(validation)?;
            let mesh = build_mesh(&geometry, cfg.discretization.h).map_err(validation)?;
            let eff =
                compute_effective(&materials, &exponents, &regime, &mesh).map_err(validation)?;
            let problem = build_limit_problem(&regime, &eff, &mesh, cfg.prefer_reduced)
                .map_err(validation)?;
            let sol = solve_limit(
                &problem,
                &mesh,
                &materials,
                cfg.discretization.t_end,
                cfg.discretization.dt,
            )
            .map_err(solver_err)?;
            dump_solution(&args.out, "limit", &mesh, &sol, &cfg.to_json())
                .map_err(|e| (2, e.to_string()))?;
            println!(
                "limit solve ({:?}/{:?}): {} time levels",
                problem.mech_form,
                problem.flow_form,
                sol.times.len()
            );
        }
        "sweep" | "check" => {
            validate_exponents(&exponents, &geometry).map_err(validation)?;
            let mut sweep = cfg.sweep();
            sweep.jobs = args.jobs.max(1);
            if args.slow {
                sweep
                    .eps_list
                    .push(sweep.eps_list.last().copied().unwrap_or(0.0625) / 2.0);
            }
            let report = run_sweep(&sweep).map_err(solver_err)?;
            write(&args.out.join("report.csv"), &report.to_csv())
                .map_err(|e| (2, e.to_string()))?;
            write(&args.out.join("verdicts.txt"), &report.verdicts_text())
                .map_err(|e| (2, e.to_string()))?;
            print!("{}", report.verdicts_text());
            if args.command == "check" && !report.all_pass() {
                return Err((2, "one or more sweep verdicts failed".into()));
            }
        }
        other => return Err((1, format!("unknown subcommand '{other}'\n{USAGE}"))),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
