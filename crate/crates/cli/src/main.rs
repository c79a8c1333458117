//! `greedyperm`: greedy permutations and greedy trees from the command line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use greedyperm::fvd::{InsertionReport, Snapshot, SplitEvent};
use greedyperm::metric::{load_points, DistanceCounter};
use greedyperm::verify::{self, Auditor, Report};
use greedyperm::{
    clarkson_bb, clarkson_observed, gonzalez, gt_build, gt_merge, gt_refine, BackburnerOrder,
    BbOptions, Error, FvdConfig, Generator, Metric, NoObserver, Norm, Observer, Perm, PointId,
    RunTelemetry, Space, Tree,
};

const CHECK_LIMIT: usize = 20_000;

#[derive(Parser)]
#[command(
    name = "greedyperm",
    version,
    about = "Greedy permutations and greedy trees on point sets"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a greedy permutation.
    Permute(PermuteArgs),
    /// Compute a greedy tree.
    Tree(TreeArgs),
    /// Merge two greedy trees on disjoint point sets.
    Merge(MergeArgs),
    /// Refine a greedy tree into a (1 + 1/n)-greedy permutation.
    Refine(RefineArgs),
    /// Check permutations, trees, traces or an instrumented run.
    Verify(VerifyArgs),
    /// Run one algorithm on generated points and print a CSV row.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Gonzalez,
    Clarkson,
    ClarksonBb,
    Build,
}

impl Algorithm {
    fn name(self) -> &'static str {
        match self {
            Algorithm::Gonzalez => "gonzalez",
            Algorithm::Clarkson => "clarkson",
            Algorithm::ClarksonBb => "clarkson-bb",
            Algorithm::Build => "build",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Order {
    Fifo,
    Lifo,
}

#[derive(Args, Clone)]
struct Constants {
    /// Lazy-move constant λ.
    #[arg(long, default_value_t = 2.0)]
    lazy: f64,
    /// Cell approximation κ.
    #[arg(long = "cell-approx", default_value_t = 3.0)]
    cell_approx: f64,
    /// Heap approximation γ.
    #[arg(long = "heap-approx", default_value_t = 4.0)]
    heap_approx: f64,
    /// Bucket base β.
    #[arg(long = "bucket-base", default_value_t = 2.0)]
    bucket_base: f64,
    /// Number of buckets s in the queue window.
    #[arg(long, default_value_t = 7)]
    buckets: usize,
    /// Backburner removal order.
    #[arg(long, value_enum, default_value_t = Order::Fifo)]
    backburner: Order,
}

impl Constants {
    fn config(&self) -> FvdConfig {
        FvdConfig {
            lazy: self.lazy,
            cell_approx: self.cell_approx,
            heap_approx: self.heap_approx,
            bucket_base: self.bucket_base,
            buckets: self.buckets,
        }
    }

    fn options(&self) -> BbOptions {
        let backburner = match self.backburner {
            Order::Fifo => BackburnerOrder::Fifo,
            Order::Lifo => BackburnerOrder::Lifo,
        };
        BbOptions {
            backburner,
            histogram: false,
        }
    }
}

#[derive(Args)]
struct Input {
    /// Point file: one point per line, coordinates separated by whitespace or commas.
    #[arg(long)]
    points: PathBuf,
    /// Norm: l1, l2 or linf.
    #[arg(long, default_value = "l2")]
    metric: Norm,
}

#[derive(Args)]
struct PermuteArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    constants: Constants,
    /// Algorithm to run.
    #[arg(long, value_enum, default_value_t = Algorithm::ClarksonBb)]
    algorithm: Algorithm,
    /// Start point index. `build` always starts at point 0.
    #[arg(long, default_value_t = 0)]
    start: u32,
    /// Write one line per insertion to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Append the measured greedy factor (quadratic).
    #[arg(long)]
    check: bool,
    /// Allow `--check` on large inputs.
    #[arg(long)]
    force: bool,
    /// Build subtrees on the thread pool (`build` only).
    #[arg(long)]
    parallel: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    constants: Constants,
    /// Algorithm to run.
    #[arg(long, value_enum, default_value_t = Algorithm::Build)]
    algorithm: Algorithm,
    /// Start point index, inside the subset when one is given.
    #[arg(long)]
    start: Option<u32>,
    /// Only use points with indices in `lo:hi` (half-open).
    #[arg(long)]
    subset: Option<String>,
    /// Write one line per insertion to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Build subtrees on the thread pool (`build` only).
    #[arg(long)]
    parallel: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    constants: Constants,
    /// First tree; its root becomes the root of the result.
    #[arg(long)]
    a: PathBuf,
    /// Second tree.
    #[arg(long)]
    b: PathBuf,
    /// Write one line per insertion to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    #[command(flatten)]
    input: Input,
    /// Tree file covering every point.
    #[arg(long = "in")]
    tree: PathBuf,
    /// Append the measured greedy factor (quadratic).
    #[arg(long)]
    check: bool,
    /// Allow `--check` on large inputs.
    #[arg(long)]
    force: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    constants: Constants,
    /// Permutation file to check against its factor claim.
    #[arg(long)]
    perm: Option<PathBuf>,
    /// Tree file to check against its header constants.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Trace file to check against the permutation or tree.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Strong packing constant to check on the tree.
    #[arg(long)]
    packing: Option<f64>,
    /// Covering constant to check on the tree.
    #[arg(long)]
    covering: Option<f64>,
    /// Rerun this algorithm with every diagram invariant checked.
    #[arg(long, value_enum)]
    audit: Option<Algorithm>,
    /// Start point index.
    #[arg(long, default_value_t = 0)]
    start: u32,
    /// Snapshot period of the audit.
    #[arg(long)]
    every: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// `uniform:<dim>:<n>`, `expline:<n>` or `twoscale:<n>`.
    #[arg(long = "gen")]
    generator: Generator,
    /// Norm: l1, l2 or linf.
    #[arg(long, default_value = "l2")]
    metric: Norm,
    /// Seed of the point generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    constants: Constants,
    /// Algorithm to run.
    #[arg(long, value_enum, default_value_t = Algorithm::ClarksonBb)]
    algorithm: Algorithm,
    /// Start point index.
    #[arg(long, default_value_t = 0)]
    start: u32,
    /// Write one line per insertion to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Build subtrees on the thread pool (`build` only).
    #[arg(long)]
    parallel: bool,
}

enum Failure {
    Usage(String),
    Input(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Contract(_) | Error::InvalidPoint { .. } | Error::BoundUnavailable(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let res = match cli.cmd {
        Command::Permute(a) => permute(a),
        Command::Tree(a) => tree(a),
        Command::Merge(a) => merge(a),
        Command::Refine(a) => refine(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(3)
        }
    }
}

fn open(path: &Path) -> std::result::Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> std::result::Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn sink(out: &Option<PathBuf>) -> std::result::Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(input: &Input) -> std::result::Result<Space, Failure> {
    Ok(load_points(open(&input.points)?, input.metric)?)
}

fn read_tree(path: &Path, space: &Space) -> std::result::Result<Tree, Failure> {
    Tree::read(open(path)?, Some(space))
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn check_start(space: &Space, start: u32) -> Outcome {
    if start as usize >= space.len() {
        return Err(Failure::Usage(format!(
            "--start {start} is out of range for {} points",
            space.len()
        )));
    }
    Ok(())
}

fn check_allowed(n: usize, force: bool) -> Outcome {
    if n > CHECK_LIMIT && !force {
        return Err(Failure::Usage(format!(
            "--check is quadratic; {n} points exceed {CHECK_LIMIT}, pass --force"
        )));
    }
    Ok(())
}

/// Writes insertion reports and backburner events, one per line.
struct Tracer {
    out: BufWriter<File>,
    err: Option<io::Error>,
}

impl Tracer {
    fn open(path: &Option<PathBuf>) -> std::result::Result<Option<Tracer>, Failure> {
        match path {
            Some(p) => Ok(Some(Tracer {
                out: create(p)?,
                err: None,
            })),
            None => Ok(None),
        }
    }

    fn line(&mut self, s: std::fmt::Arguments<'_>) {
        if self.err.is_none() {
            if let Err(e) = writeln!(self.out, "{s}") {
                self.err = Some(e);
            }
        }
    }

    fn close(mut self) -> Outcome {
        if let Some(e) = self.err.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(())
    }
}

impl Observer<f64> for Tracer {
    fn on_start(&mut self, splits: &[SplitEvent<f64>], _snap: Option<&Snapshot<f64>>) {
        if !splits.is_empty() {
            self.line(format_args!("start tidy_splits={}", splits.len()));
        }
    }

    fn on_insertion(&mut self, rep: &InsertionReport<f64>, _snap: Option<&Snapshot<f64>>) {
        self.line(format_args!("{}", rep.trace_line()));
    }

    fn on_backburner_entry(&mut self, cell: u32, key: f64, _snap: Option<&Snapshot<f64>>) {
        self.line(format_args!("backburner_entry cell={cell} key={key}"));
    }

    fn on_backburner_removal(&mut self, cell: u32, degree: usize) {
        self.line(format_args!(
            "backburner_removal cell={cell} degree={degree}"
        ));
    }
}

fn close_trace(t: Option<Tracer>) -> Outcome {
    t.map_or(Ok(()), Tracer::close)
}

fn traceable(alg: Algorithm, trace: &Option<PathBuf>) -> Outcome {
    if trace.is_some() && matches!(alg, Algorithm::Gonzalez | Algorithm::Build) {
        return Err(Failure::Usage(format!(
            "--trace is not available for {}",
            alg.name()
        )));
    }
    Ok(())
}

struct Run {
    perm: Option<Perm>,
    tree: Tree,
    tel: RunTelemetry,
}

fn run(
    space: &Space,
    alg: Algorithm,
    start: u32,
    c: &Constants,
    parallel: bool,
    obs: &mut dyn Observer<f64>,
) -> std::result::Result<Run, Failure> {
    let cfg = c.config();
    match alg {
        Algorithm::Gonzalez => {
            let counted = DistanceCounter::new(space);
            let t0 = std::time::Instant::now();
            let (perm, tree) = gonzalez(&counted, PointId(start))?;
            let evals = counted.count();
            let tel = RunTelemetry {
                distance_evals: evals,
                insertions: space.len() as u64 - 1,
                touches: evals,
                seconds: t0.elapsed().as_secs_f64(),
                ..RunTelemetry::default()
            };
            Ok(Run {
                perm: Some(perm),
                tree,
                tel,
            })
        }
        Algorithm::Clarkson => {
            let (perm, tree, tel) = clarkson_observed(space, PointId(start), &cfg, obs)?;
            Ok(Run {
                perm: Some(perm),
                tree,
                tel,
            })
        }
        Algorithm::ClarksonBb => {
            let (perm, tree, tel) = clarkson_bb(space, PointId(start), &cfg, &c.options(), obs)?;
            Ok(Run {
                perm: Some(perm),
                tree,
                tel,
            })
        }
        Algorithm::Build => {
            if start != 0 {
                return Err(Failure::Usage("build always starts at point 0".into()));
            }
            let (tree, tel) = gt_build(space, &cfg, parallel)?;
            Ok(Run {
                perm: None,
                tree,
                tel,
            })
        }
    }
}

/// Writes `perm`, and with `check` its measured greedy factor.
fn emit_perm(space: &Space, perm: &Perm, check: bool, out: &Option<PathBuf>) -> Outcome {
    let mut w = sink(out)?;
    perm.write(&mut w)?;
    let mut ok = true;
    if check {
        let f = verify::greedy_factor(space, perm);
        writeln!(w, "greedy_factor={f}")?;
        ok = f <= perm.factor_claim * (1.0 + 1e-9);
    }
    w.flush()?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn permute(a: PermuteArgs) -> Outcome {
    let space = load(&a.input)?;
    check_start(&space, a.start)?;
    if a.check {
        check_allowed(space.len(), a.force)?;
    }
    traceable(a.algorithm, &a.trace)?;
    let mut tracer = Tracer::open(&a.trace)?;
    let r = match tracer.as_mut() {
        Some(t) => run(&space, a.algorithm, a.start, &a.constants, a.parallel, t)?,
        None => run(
            &space,
            a.algorithm,
            a.start,
            &a.constants,
            a.parallel,
            &mut NoObserver,
        )?,
    };
    close_trace(tracer)?;
    let perm = match r.perm {
        Some(p) => p,
        None => gt_refine(&space, &r.tree)?.0,
    };
    emit_perm(&space, &perm, a.check, &a.out)
}

fn parse_subset(s: &str, n: usize) -> std::result::Result<(u32, u32), Failure> {
    let bad = || {
        Failure::Usage(format!(
            "--subset {s:?}: expected lo:hi with lo < hi <= {n}"
        ))
    };
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: u32 = lo.parse().map_err(|_| bad())?;
    let hi: u32 = hi.parse().map_err(|_| bad())?;
    if lo >= hi || hi as usize > n {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn tree(a: TreeArgs) -> Outcome {
    let space = load(&a.input)?;
    let n = space.len();
    let (lo, hi) = match &a.subset {
        Some(s) => parse_subset(s, n)?,
        None => (0, n as u32),
    };
    let part;
    let target = if (lo, hi) == (0, n as u32) {
        &space
    } else {
        let rows: Vec<&[f64]> = (lo..hi).map(|i| space.point(PointId(i))).collect();
        part = Space::from_rows(&rows, space.norm())?;
        &part
    };
    let start = match a.start {
        Some(s) if s < lo || s >= hi => {
            return Err(Failure::Usage(format!(
                "--start {s} is outside the subset {lo}:{hi}"
            )));
        }
        Some(s) => s - lo,
        None => 0,
    };
    traceable(a.algorithm, &a.trace)?;
    let mut tracer = Tracer::open(&a.trace)?;
    let r = match tracer.as_mut() {
        Some(t) => run(target, a.algorithm, start, &a.constants, a.parallel, t)?,
        None => run(
            target,
            a.algorithm,
            start,
            &a.constants,
            a.parallel,
            &mut NoObserver,
        )?,
    };
    close_trace(tracer)?;
    let t = if lo == 0 { r.tree } else { r.tree.shifted(lo)? };
    let mut w = sink(&a.out)?;
    t.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn merge(a: MergeArgs) -> Outcome {
    let space = load(&a.input)?;
    let ta = read_tree(&a.a, &space)?;
    let tb = read_tree(&a.b, &space)?;
    let cfg = a.constants.config();
    let opts = a.constants.options();
    let mut tracer = Tracer::open(&a.trace)?;
    let (t, _) = match tracer.as_mut() {
        Some(obs) => gt_merge(&space, &ta, &tb, &cfg, &opts, obs)?,
        None => gt_merge(&space, &ta, &tb, &cfg, &opts, &mut NoObserver)?,
    };
    close_trace(tracer)?;
    let mut w = sink(&a.out)?;
    t.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn refine(a: RefineArgs) -> Outcome {
    let space = load(&a.input)?;
    if a.check {
        check_allowed(space.len(), a.force)?;
    }
    let t = read_tree(&a.tree, &space)?;
    let (perm, _, _) = gt_refine(&space, &t)?;
    emit_perm(&space, &perm, a.check, &a.out)
}

/// `(pred, eps)` of every non-start point named by `site=` lines.
fn parse_trace(path: &Path) -> std::result::Result<(Vec<(u32, u32, f64)>, Vec<usize>), Failure> {
    let mut sites = Vec::new();
    let mut removals = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let fields: HashMap<&str, &str> = line
            .split_whitespace()
            .filter_map(|f| f.split_once('='))
            .collect();
        let bad = |m: &str| Failure::Input(format!("{}: line {}: {m}", path.display(), i + 1));
        if line.starts_with("site=") {
            let get = |k: &str| {
                fields
                    .get(k)
                    .copied()
                    .ok_or_else(|| bad(&format!("missing {k}")))
            };
            let site = get("site")?.parse().map_err(|_| bad("bad site"))?;
            let pred = get("pred")?.parse().map_err(|_| bad("bad pred"))?;
            let eps = get("eps")?.parse().map_err(|_| bad("bad eps"))?;
            sites.push((site, pred, eps));
        } else if line.starts_with("backburner_removal") {
            let d = fields
                .get("degree")
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| bad("bad degree"))?;
            removals.push(d);
        }
    }
    Ok((sites, removals))
}

fn check_trace(
    path: &Path,
    expected: Option<HashMap<u32, (u32, f64)>>,
) -> std::result::Result<Vec<Report>, Failure> {
    let (sites, removals) = parse_trace(path)?;
    let mut out = Vec::new();
    match expected {
        None => out.push(Report::vacuous("trace.consistent")),
        Some(map) => {
            let bad = sites.iter().find(|(s, p, e)| map.get(s) != Some(&(*p, *e)));
            out.push(match bad {
                Some((s, p, e)) => Report::fail(
                    "trace.consistent",
                    format!("site {s} pred {p} eps {e} disagrees"),
                ),
                None => Report::pass("trace.consistent").with_measured(sites.len() as f64),
            });
        }
    }
    out.push(if removals.is_empty() {
        Report::vacuous("trace.isolation")
    } else {
        match removals.iter().find(|&&d| d > 0) {
            Some(d) => Report::fail(
                "trace.isolation",
                format!("backburner removal with degree {d}"),
            ),
            None => Report::pass("trace.isolation").with_measured(removals.len() as f64),
        }
    });
    Ok(out)
}

fn verify_cmd(a: VerifyArgs) -> Outcome {
    let space = load(&a.input)?;
    let mut reports = Vec::new();
    let mut expected: Option<HashMap<u32, (u32, f64)>> = None;
    if let Some(p) = &a.perm {
        let perm =
            Perm::read(open(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
        perm.validate(space.len())?;
        reports.extend(verify::verify_permutation(&space, &perm, perm.factor_claim));
        expected = Some(
            perm.entries
                .iter()
                .filter_map(|e| e.pred.map(|q| (e.point.0, (q.0, e.eps))))
                .collect(),
        );
    }
    if let Some(p) = &a.tree {
        let t = read_tree(p, &space)?;
        reports.extend(verify::verify_tree(&space, &t, t.params()));
        if let Some(pi) = a.packing {
            reports.push(verify::verify_strong_packing(&space, &t, pi));
        }
        if let Some(g) = a.covering {
            reports.push(verify::verify_covering(&space, &t, g));
        }
        let recs = t
            .records()
            .iter()
            .filter_map(|r| r.pred.map(|q| (r.point.0, (q.0, r.eps))));
        expected.get_or_insert_with(HashMap::new).extend(recs);
    } else if a.packing.is_some() || a.covering.is_some() {
        return Err(Failure::Usage(
            "--packing and --covering need --tree".into(),
        ));
    }
    if let Some(p) = &a.trace {
        reports.extend(check_trace(p, expected)?);
    }
    if let Some(alg) = a.audit {
        check_start(&space, a.start)?;
        let cfg = a.constants.config();
        let mut aud = Auditor::new(&space, &cfg);
        if let Some(k) = a.every {
            aud = aud.every(k);
        }
        match alg {
            Algorithm::Clarkson => {
                clarkson_observed(&space, PointId(a.start), &cfg, &mut aud)?;
            }
            Algorithm::ClarksonBb => {
                clarkson_bb(
                    &space,
                    PointId(a.start),
                    &cfg,
                    &a.constants.options(),
                    &mut aud,
                )?;
            }
            other => {
                return Err(Failure::Usage(format!(
                    "--audit is not available for {}",
                    other.name()
                )))
            }
        }
        reports.extend(aud.reports().iter().cloned());
    }
    if reports.is_empty() {
        return Err(Failure::Usage(
            "nothing to verify: pass --perm, --tree, --trace or --audit".into(),
        ));
    }
    let mut w = sink(&a.out)?;
    for r in &reports {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    if verify::all_passed(&reports) {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn bench(a: BenchArgs) -> Outcome {
    let space: Space = a.generator.generate(a.seed, a.metric)?;
    check_start(&space, a.start)?;
    traceable(a.algorithm, &a.trace)?;
    let mut tracer = Tracer::open(&a.trace)?;
    let r = match tracer.as_mut() {
        Some(t) => run(&space, a.algorithm, a.start, &a.constants, a.parallel, t)?,
        None => run(
            &space,
            a.algorithm,
            a.start,
            &a.constants,
            a.parallel,
            &mut NoObserver,
        )?,
    };
    close_trace(tracer)?;
    let t = &r.tel;
    let mut w = sink(&None)?;
    writeln!(
        w,
        "n,algorithm,seconds,distance_evals,touches,max_degree,max_cell_entries"
    )?;
    writeln!(
        w,
        "{},{},{:.6},{},{},{},{}",
        space.len(),
        a.algorithm.name(),
        t.seconds,
        t.distance_evals,
        t.touches,
        t.max_degree,
        t.max_cell_entries
    )?;
    w.flush()?;
    Ok(())
}
