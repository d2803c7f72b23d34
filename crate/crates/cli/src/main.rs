use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conormal::gen::Limits;
use conormal::io::{load_str, Instance, LoadError};
use conormal::mueu::{compose_cycle, mueu, pushforward_cycle, set_negative_control, LagCycle};
use conormal::qlinalg::format_rational;
use conormal::suites::{run_check, SUITES};
use conormal::tracekernel::expand;
use conormal::{exec, CellularSheaf};

const EXIT_INVALID: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_PARSE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "conormal",
    version,
    about = "Euler classes, trace kernels and Lefschetz numbers of cellular sheaves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate every payload in an instance file.
    Validate { file: PathBuf },
    /// Euler characteristic of a sheaf's global sections.
    Chi(Named),
    /// Characteristic cycle of a sheaf, sorted by dimension then id.
    Cc(Named),
    /// Run the seeded property suites.
    Check(CheckArgs),
    /// Compose two kernels and compare with the composition of their cycles.
    Compose {
        file: PathBuf,
        first: String,
        second: String,
    },
    /// Direct image of a sheaf and of its cycle.
    Pushforward { file: PathBuf, map: String, sheaf: String },
    /// Characteristic cycle of the Verdier dual.
    Dual(Named),
    /// Global trace against the sum of local traces.
    Lefschetz(Named),
    /// Rebuild the sheaf underlying a trace kernel, as an instance file.
    Expand(Named),
}

#[derive(Args)]
struct Named {
    file: PathBuf,
    /// Payload name; may be omitted when the file has exactly one.
    name: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = Limits::default().max_dim)]
    max_dim: usize,
    #[arg(long, default_value_t = Limits::default().max_cells)]
    max_cells: usize,
    /// Restrict to these suites (repeatable). Default: all.
    #[arg(long = "suite", value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
    suites: Vec<String>,
    /// Where the smallest counterexample is written on failure.
    #[arg(long, default_value = "counterexample.json")]
    counterexample: PathBuf,
    /// Also write the report to this file.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Test hook: corrupt the sign convention of the cycle algebra.
    #[arg(long, hide = true)]
    negative_control: bool,
}

/// A failed command: exit code plus message for stderr.
struct Fail(u8, String);

impl From<LoadError> for Fail {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Parse(_) => Fail(EXIT_PARSE, e.to_string()),
            LoadError::Invalid(_) => Fail(EXIT_INVALID, e.to_string()),
        }
    }
}

impl From<conormal::Error> for Fail {
    fn from(e: conormal::Error) -> Self {
        Fail(EXIT_INVALID, e.to_string())
    }
}

type Run = Result<u8, Fail>;

fn load(path: &Path) -> Result<Instance, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    Ok(load_str(&text)?)
}

fn pick<'a, T>(
    what: &str,
    items: &'a std::collections::BTreeMap<String, T>,
    name: Option<&str>,
) -> Result<&'a T, Fail> {
    match name {
        Some(n) => items
            .get(n)
            .ok_or_else(|| Fail(EXIT_INVALID, format!("no {what} named {n:?}"))),
        None if items.len() == 1 => Ok(items.values().next().expect("one item")),
        None => Err(Fail(
            EXIT_INVALID,
            format!(
                "{} {what}s in file; name one of: {}",
                items.len(),
                items.keys().cloned().collect::<Vec<_>>().join(", ")
            ),
        )),
    }
}

fn print_cycle(c: &LagCycle) {
    for (id, dim, w) in c.listing() {
        println!("{w:+} {id} (dim {dim})");
    }
    println!("degree {}", c.degree());
}

fn sheaf<'a>(inst: &'a Instance, n: &Named) -> Result<&'a CellularSheaf, Fail> {
    pick("sheaf", &inst.sheaves, n.name.as_deref())
}

fn validate(file: &Path) -> Run {
    let inst = load(file)?;
    println!(
        "ok: {} sheaves, {} maps, {} cycles, {} kernels, {} lefschetz instances",
        inst.sheaves.len(),
        inst.maps.len(),
        inst.cycles.len(),
        inst.kernels.len(),
        inst.lefschetz.len()
    );
    Ok(0)
}

fn check(args: &CheckArgs) -> Run {
    if args.negative_control {
        set_negative_control(true);
    }
    let limits = Limits::new(args.max_dim, args.max_cells);
    let report =
        run_check(args.seed, args.cases, limits, &args.suites).map_err(|e| Fail(EXIT_INVALID, e.to_string()))?;
    let text = report.render();
    print!("{text}");
    eprintln!("wall time: {:.3}s", report.wall_time.as_secs_f64());
    if let Some(path) = &args.report {
        std::fs::write(path, &text).map_err(|e| Fail(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    }
    match report.smallest_failure() {
        None => Ok(0),
        Some(f) => {
            std::fs::write(&args.counterexample, &f.counterexample)
                .map_err(|e| Fail(EXIT_INVALID, format!("{}: {e}", args.counterexample.display())))?;
            eprintln!(
                "smallest counterexample ({} case {}, {}) written to {}",
                f.suite,
                f.case,
                f.property,
                args.counterexample.display()
            );
            Ok(EXIT_VIOLATION)
        }
    }
}

fn verdict(equal: bool) -> u8 {
    println!("verdict: {}", if equal { "equal" } else { "DIFFERENT" });
    if equal {
        0
    } else {
        EXIT_VIOLATION
    }
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Chi(n) => {
            let inst = load(&n.file)?;
            println!("{}", sheaf(&inst, &n)?.euler_char()?);
            Ok(0)
        }
        Command::Cc(n) => {
            let inst = load(&n.file)?;
            print_cycle(&mueu(sheaf(&inst, &n)?));
            Ok(0)
        }
        Command::Dual(n) => {
            let inst = load(&n.file)?;
            print_cycle(&mueu(&sheaf(&inst, &n)?.verdier_dual()?));
            Ok(0)
        }
        Command::Check(args) => check(&args),
        Command::Compose { file, first, second } => {
            let inst = load(&file)?;
            let k12 = pick("sheaf", &inst.sheaves, Some(&first))?;
            let k23 = pick("sheaf", &inst.sheaves, Some(&second))?;
            let sheaf_side = mueu(&CellularSheaf::kernel_compose(k12, k23)?);
            let cycle_side = compose_cycle(&mueu(k12), &mueu(k23))?;
            println!("class of the composed kernel:");
            print_cycle(&sheaf_side);
            println!("composition of the classes:");
            print_cycle(&cycle_side);
            Ok(verdict(sheaf_side == cycle_side))
        }
        Command::Pushforward { file, map, sheaf } => {
            let inst = load(&file)?;
            let f = pick("map", &inst.maps, Some(&map))?;
            let s = pick("sheaf", &inst.sheaves, Some(&sheaf))?;
            let sheaf_side = mueu(&CellularSheaf::pushforward(f, s)?);
            let cycle_side = pushforward_cycle(f, &mueu(s))?;
            println!("class of the direct image:");
            print_cycle(&sheaf_side);
            println!("direct image of the class:");
            print_cycle(&cycle_side);
            Ok(verdict(sheaf_side == cycle_side))
        }
        Command::Lefschetz(n) => {
            let inst = load(&n.file)?;
            let l = pick("lefschetz instance", &inst.lefschetz, n.name.as_deref())?;
            let global = l.global_trace()?;
            let local = l.local_trace_sum();
            println!("global trace: {}", format_rational(&global));
            println!("local sum: {}", format_rational(&local));
            Ok(verdict(global == local))
        }
        Command::Expand(n) => {
            let inst = load(&n.file)?;
            let k = pick("kernel", &inst.kernels, n.name.as_deref())?;
            let rebuilt = expand(k.provenance())?;
            let mut out = Instance::default();
            out.sheaves.insert(
                n.name.clone().unwrap_or_else(|| "kernel".into()),
                rebuilt.underlying().clone(),
            );
            println!("{}", out.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // usage errors must not look like property violations
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    exec::configure_threads();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
