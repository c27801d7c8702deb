//! Command-line surface: reproducible experiments over the sequence
//! calculus and the division pipeline, emitting JSON reports and CSV
//! curves. Every run writes a manifest echoing its parameters; re-running a
//! manifest reproduces the outputs byte for byte.
//!
//! Exit codes: 0 success, 2 parse/input failure, 3 measured-bound
//! violation (the run is the test).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carleman::builtins;
use carleman::divide;
use carleman::seqcore::{self, PositiveSequence, WeightSequence};
use carleman::wfun::{self, WeightFunction};
use carleman::{Error, logdom};

#[derive(Parser)]
#[command(name = "carleman", version, about = "Weight-sequence calculus and division experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Certificates, growth constants and quasianalyticity of a weight
    /// sequence (builtin name like `gevrey:2`, `q:1`, or a JSON file).
    CheckSequence(CheckArgs),
    /// Young conjugate of a weight function, with optional associated
    /// matrix and biconjugation check.
    Conjugate(ConjugateArgs),
    /// Run the division pipeline on g = f^j, h = f^{j+1}.
    Divide(DivideArgs),
    /// Almost analytic extension of a smooth function: |∂̄F| heat-map data
    /// and envelope fit.
    Extend(ExtendArgs),
    /// Re-execute a saved manifest.
    Rerun { manifest: PathBuf },
}

#[derive(Args, Clone)]
struct CheckArgs {
    /// Builtin name (`factorial`, `gevrey:s`, `q:n`, `exp-k2`) or JSON path.
    spec: String,
    /// Truncation length K.
    #[arg(long, default_value_t = 256)]
    k: usize,
    /// Log-domain tolerance for re-judging the convexity certificates.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory for report and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ConjugateArgs {
    /// Builtin name (`power:a`, `log2`, `t-over-log`) or JSON path.
    spec: String,
    /// Truncation length for matrix rows.
    #[arg(long, default_value_t = 256)]
    k: usize,
    /// Comma-separated matrix indices, e.g. `0.5,1,2`.
    #[arg(long)]
    matrix: Option<String>,
    /// Print the biconjugation defect.
    #[arg(long)]
    biconjugate: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct DivideArgs {
    /// Recover f from its own powers (builtin smooth function name).
    #[arg(long)]
    f: Option<String>,
    /// Explicit g = f^j (used when --f is absent).
    #[arg(long)]
    g: Option<String>,
    /// Explicit h = f^{j+1} (used when --f is absent).
    #[arg(long = "h", id = "h_fn")]
    h_fn: Option<String>,
    /// Power exponent j.
    #[arg(long)]
    j: usize,
    /// Weight sequence for the (singleton) chain.
    #[arg(long, default_value = "gevrey:2")]
    seq: String,
    /// Truncation length K.
    #[arg(long, default_value_t = 256)]
    k: usize,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.0078125)]
    grid: f64,
    /// Coarsest ellipse parameter.
    #[arg(long, default_value_t = 0.4)]
    eps0: f64,
    /// Number of dyadic levels.
    #[arg(long, default_value_t = 5)]
    levels: usize,
    /// Derivative-order cap.
    #[arg(long, default_value_t = 40)]
    dcap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ExtendArgs {
    /// Smooth builtin (`bump:gevrey2`, `analytic`, `linear`, `poly:…`).
    #[arg(long, default_value = "bump:gevrey2")]
    f: String,
    /// Weight sequence the envelope is fitted against.
    #[arg(long, default_value = "gevrey:2")]
    seq: String,
    #[arg(long, default_value_t = 256)]
    k: usize,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.0078125)]
    grid: f64,
    /// Derivative-order cap.
    #[arg(long, default_value_t = 40)]
    dcap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::CheckSequence(args) => cmd_check_sequence(args),
        Command::Conjugate(args) => cmd_conjugate(args),
        Command::Divide(args) => cmd_divide(args),
        Command::Extend(args) => cmd_extend(args),
        Command::Rerun { manifest } => cmd_rerun(&manifest),
    }
}

fn write_out(dir: &Option<PathBuf>, name: &str, contents: &str) -> Result<(), Error> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn write_manifest(dir: &Option<PathBuf>, argv: Vec<String>) -> Result<(), Error> {
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "argv": argv,
    });
    write_out(dir, "manifest.json", &serde_json::to_string_pretty(&manifest)?)
}

fn load_sequence(spec: &str, k: usize) -> Result<WeightSequence, Error> {
    if Path::new(spec).exists() {
        let raw = fs::read_to_string(spec)?;
        let seq: PositiveSequence = serde_json::from_str(&raw)?;
        WeightSequence::new(seq.label, seq.logv)
    } else {
        builtins::sequence(spec, k)
    }
}

fn load_weight_function(spec: &str) -> Result<WeightFunction, Error> {
    if Path::new(spec).exists() {
        let raw = fs::read_to_string(spec)?;
        let v: serde_json::Value = serde_json::from_str(&raw)?;
        let grid: Vec<f64> = serde_json::from_value(v["grid"].clone())?;
        let vals: Vec<f64> = serde_json::from_value(v["vals"].clone())?;
        let name = v["name"].as_str().unwrap_or("sampled").to_string();
        WeightFunction::from_samples(name, grid, vals)
    } else {
        builtins::weight_function(spec)
    }
}

fn cmd_check_sequence(args: CheckArgs) -> Result<ExitCode, Error> {
    let ws = load_sequence(&args.spec, args.k)?;
    let mg = seqcore::moderate_growth(&ws, &ws);
    let dc = seqcore::derivation_closed(&ws);
    let qa = seqcore::quasianalyticity(&ws);
    let reg = seqcore::regularity(&ws, &ws, seqcore::RegularityMode::R).ok();

    let mut certs = ws.certs.clone();
    if let Some(tol) = args.tol {
        certs.log_convex = carleman::check::Check::slack(certs.log_convex.witness, tol);
        certs.m_log_convex = carleman::check::Check::slack(certs.m_log_convex.witness, tol);
    }

    let report = serde_json::json!({
        "label": ws.label(),
        "K": ws.k_max(),
        "is_weight_sequence": ws.is_weight_sequence,
        "certificates": certs,
        "moderate_growth": mg,
        "derivation_closed": dc,
        "quasianalyticity": qa,
        "regularity": reg,
    });
    let pretty = serde_json::to_string_pretty(&report)?;
    println!("{pretty}");
    write_out(&args.out, "report.json", &pretty)?;
    write_manifest(&args.out, manifest_check(&args))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_conjugate(args: ConjugateArgs) -> Result<ExitCode, Error> {
    let w = load_weight_function(&args.spec)?;
    let nq = wfun::nq_integral(&w);
    println!(
        "{}: (ω1) {} (ω2) {} (ω3) {} (ω4) {} concave {}",
        w.name, w.certs.w1.ok, w.certs.w2.ok, w.certs.w3.ok, w.certs.w4.ok, w.certs.concave.ok
    );
    if !w.certs.w2.ok {
        println!("(omega2) failure: fitted tail power {:.4}", w.certs.w2.witness);
    }
    println!(
        "nq integral: partial {:.6}, tail {:?}, convergent {}",
        nq.partial, nq.tail, nq.convergent
    );

    let sgrid = logdom::logspace(0.5, 2.0 * args.k as f64, 257);
    let conj = wfun::young_conjugate(&w, &sgrid)?;
    let mut csv = String::from("s,phi_star\n");
    for (s, v) in conj.sgrid.iter().zip(&conj.vals) {
        csv.push_str(&format!("{s},{v}\n"));
    }
    write_out(&args.out, "conjugate.csv", &csv)?;

    if args.biconjugate {
        println!("biconjugation max node error: {:.3e}", wfun::biconjugate_max_error(&w));
    }

    if let Some(list) = &args.matrix {
        let xs: Result<Vec<f64>, _> = list.split(',').map(str::parse::<f64>).collect();
        let xs = xs.map_err(|_| Error::Parse(format!("bad matrix list `{list}`")))?;
        let rep = wfun::associated_matrix(&w, &xs, args.k)?;
        println!(
            "matrix: {} rows, mixed moderate-growth slack {:.3e}, order slack {:.3e}",
            rep.matrix.len(),
            rep.fctmod_worst,
            rep.order_worst
        );
        write_out(&args.out, "matrix.json", &serde_json::to_string_pretty(&rep.matrix)?)?;
    }
    write_manifest(&args.out, manifest_conj(&args))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_divide(args: DivideArgs) -> Result<ExitCode, Error> {
    let (f_true, g, h) = match (&args.f, &args.g, &args.h_fn) {
        (Some(name), _, _) => {
            let f = builtins::smooth(name)?;
            let g = f.powi(args.j)?;
            let h = f.powi(args.j + 1)?;
            (Some(f), g, h)
        }
        (None, Some(gn), Some(hn)) => (None, builtins::smooth(gn)?, builtins::smooth(hn)?),
        _ => {
            return Err(Error::Parse("need --f, or both --g and --h".into()));
        }
    };
    let base = load_sequence(&args.seq, args.k)?;
    let mat = seqcore::WeightMatrix::new(vec![(1.0, base)])?;
    let chain = divide::chain_select(&mat, args.j, seqcore::RegularityMode::R, 0)?;
    let eps: Vec<f64> = (0..args.levels).map(|i| args.eps0 / 2f64.powi(i as i32)).collect();
    let rep = divide::joris_divide(
        f_true.as_ref(),
        &g,
        &h,
        args.j,
        &chain,
        &eps,
        args.grid,
        args.dcap,
    )?;

    println!(
        "levels {} | K {:.4} | c2 {:.4} | c7 {:.4e} | corr {:.3} | uep {} | shrink {} | err mono {}",
        rep.levels.len(),
        rep.k_bound,
        rep.c2,
        rep.c7,
        rep.verdicts.correlation,
        rep.verdicts.uep_ok,
        rep.levels.iter().all(|l| l.three_lines_ok),
        rep.verdicts.err_monotone,
    );
    if let Some(rec) = &rep.recovered {
        let flagged = rec.floor.iter().filter(|&&b| b).count();
        println!("recovered f on {} samples ({} in the floor region)", rec.xs.len(), flagged);
    }
    write_out(&args.out, "division.json", &rep.to_json()?)?;
    write_out(&args.out, "curves.csv", &rep.to_csv())?;
    write_manifest(&args.out, manifest_divide(&args))?;

    if rep.all_bounds_ok() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("measured-bound violation; see report");
        Ok(ExitCode::from(3))
    }
}

fn cmd_extend(args: ExtendArgs) -> Result<ExitCode, Error> {
    let f = builtins::smooth(&args.f)?;
    let m = load_sequence(&args.seq, args.k)?;
    let geom = carleman::cplane::GridGeom::centered(2.0, 1.0, args.grid);
    let ext = carleman::approx::almost_analytic_ext(&f, &m, 1.0, geom, args.dcap)?;
    println!(
        "envelope: C {:.4e}, rho {:.4}, d_floor {:.4}, cap_binds {}",
        ext.envelope.c_measured, ext.envelope.rho, ext.envelope.d_floor, ext.envelope.cap_binds
    );
    write_out(&args.out, "dbar_heatmap.csv", &ext.dbar_vals.to_csv(None))?;
    write_out(
        &args.out,
        "extension.json",
        &serde_json::to_string_pretty(&serde_json::json!({
            "envelope": ext.envelope,
            "field": ext.f_vals.to_json(),
        }))?,
    )?;
    write_manifest(&args.out, manifest_extend(&args))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_rerun(manifest: &Path) -> Result<ExitCode, Error> {
    let raw = fs::read_to_string(manifest)?;
    let v: serde_json::Value = serde_json::from_str(&raw)?;
    let argv: Vec<String> = serde_json::from_value(v["argv"].clone())?;
    let mut full = vec!["carleman".to_string()];
    full.extend(argv);
    let cli = Cli::try_parse_from(&full).map_err(|e| Error::Parse(e.to_string()))?;
    run(cli.command)
}

// Canonical argv echoes for the manifest.

fn manifest_check(a: &CheckArgs) -> Vec<String> {
    let mut v = vec!["check-sequence".into(), a.spec.clone(), "--k".into(), a.k.to_string()];
    if let Some(t) = a.tol {
        v.extend(["--tol".into(), t.to_string()]);
    }
    if let Some(o) = &a.out {
        v.extend(["--out".into(), o.display().to_string()]);
    }
    v
}

fn manifest_conj(a: &ConjugateArgs) -> Vec<String> {
    let mut v = vec!["conjugate".into(), a.spec.clone(), "--k".into(), a.k.to_string()];
    if let Some(m) = &a.matrix {
        v.extend(["--matrix".into(), m.clone()]);
    }
    if a.biconjugate {
        v.push("--biconjugate".into());
    }
    if let Some(o) = &a.out {
        v.extend(["--out".into(), o.display().to_string()]);
    }
    v
}

fn manifest_extend(a: &ExtendArgs) -> Vec<String> {
    let mut v = vec![
        "extend".into(),
        "--f".into(),
        a.f.clone(),
        "--seq".into(),
        a.seq.clone(),
        "--k".into(),
        a.k.to_string(),
        "--grid".into(),
        a.grid.to_string(),
        "--dcap".into(),
        a.dcap.to_string(),
    ];
    if let Some(o) = &a.out {
        v.extend(["--out".into(), o.display().to_string()]);
    }
    v
}

fn manifest_divide(a: &DivideArgs) -> Vec<String> {
    let mut v = vec!["divide".into()];
    if let Some(f) = &a.f {
        v.extend(["--f".into(), f.clone()]);
    }
    if let Some(g) = &a.g {
        v.extend(["--g".into(), g.clone()]);
    }
    if let Some(h) = &a.h_fn {
        v.extend(["--h".into(), h.clone()]);
    }
    v.extend([
        "--j".into(),
        a.j.to_string(),
        "--seq".into(),
        a.seq.clone(),
        "--k".into(),
        a.k.to_string(),
        "--grid".into(),
        a.grid.to_string(),
        "--eps0".into(),
        a.eps0.to_string(),
        "--levels".into(),
        a.levels.to_string(),
        "--dcap".into(),
        a.dcap.to_string(),
    ]);
    if let Some(o) = &a.out {
        v.extend(["--out".into(), o.display().to_string()]);
    }
    v
}
