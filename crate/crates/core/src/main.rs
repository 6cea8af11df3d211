use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use rotbox::diffcheck::{self, DiffError, PARAM_NAMES};
use rotbox::geom::{sort_corners, CornerQuad, Point2};
use rotbox::harness::dota::{rectify, Rectified};
use rotbox::harness::eval::{GtBox, ScoredBox};
use rotbox::harness::report::{write_csv, CsvTable, PairValues, PrCurves};
use rotbox::harness::sim::SimError;
use rotbox::harness::{self, coco_thresholds, evaluate_ap, parse_detections, parse_dota, MetricMatrix, SimConfig};
use rotbox::iou::{fpdiou_quads, Enclosing};
use rotbox::oracle::stream_rng;
use rotbox::piou::PiouConfig;
use rotbox::{ImageDims, Metric, MetricKind, RotatedBox};

#[derive(Parser)]
#[command(name = "rotbox", version, about = "Rotated bounding box metrics, evaluation and regression simulation")]
struct Cli {
    /// Seed for every random draw (overrides a config file seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path (standard output when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One metric value for a pair of boxes, or for index-aligned boxes of two files.
    Metric(MetricArgs),
    /// All ground-truth by prediction metric values of two files.
    Matrix(MatrixArgs),
    /// Average precision of scored detections.
    Eval(EvalArgs),
    /// Gradient-descent regression from disjoint initial boxes.
    Simulate(SimulateArgs),
    /// Compare forward-mode gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Clone)]
struct MetricOpts {
    #[arg(long, default_value = "rotated_iou")]
    metric: MetricKind,
    #[arg(long, default_value_t = 1024.0)]
    image_w: f64,
    #[arg(long, default_value_t = 1024.0)]
    image_h: f64,
    /// GIoU enclosing region: hull or aabb.
    #[arg(long, default_value = "hull")]
    enclosing: String,
    #[arg(long, default_value_t = 10.0)]
    piou_k: f64,
    #[arg(long, default_value_t = 1.0)]
    piou_step: f64,
    /// Report 3·KFIoU so identical boxes score 1.
    #[arg(long)]
    kfiou_normalized: bool,
}

#[derive(Args)]
struct MetricArgs {
    #[command(flatten)]
    opts: MetricOpts,
    /// Box as cx,cy,w,h,theta or x1,y1,...,x4,y4.
    #[arg(long, allow_hyphen_values = true, requires = "prd", conflicts_with = "gt_file")]
    gt: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    prd: Option<String>,
    /// DOTA file of ground-truth boxes.
    #[arg(long, requires = "prd_file")]
    gt_file: Option<PathBuf>,
    #[arg(long)]
    prd_file: Option<PathBuf>,
    /// Pass non-rectangular quads straight to FPDIoU instead of rejecting them.
    #[arg(long)]
    keep_quads: bool,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    opts: MetricOpts,
    #[arg(long)]
    gt_file: PathBuf,
    #[arg(long)]
    prd_file: PathBuf,
    #[arg(long)]
    keep_quads: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// DOTA ground truth.
    #[arg(long)]
    gt_file: PathBuf,
    /// DOTA detections with a trailing score column.
    #[arg(long)]
    prd_file: PathBuf,
    /// Comma-separated IoU thresholds (default 0.5:0.05:0.95).
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    /// Also write precision-recall curves here.
    #[arg(long)]
    pr_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    loss: Option<MetricKind>,
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Extra key=value settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    opts: MetricOpts,
    #[arg(long, allow_hyphen_values = true, requires = "prd")]
    gt: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    prd: Option<String>,
    /// Check this many random smooth configurations instead of one pair.
    #[arg(long, conflicts_with = "gt")]
    random: Option<usize>,
    /// Relative finite-difference step.
    #[arg(long, default_value_t = diffcheck::DEFAULT_FD_STEP)]
    h: f64,
}

enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Numeric(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn numeric<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numeric(e.to_string())
}

fn build_metric(o: &MetricOpts) -> CliResult<Metric> {
    let dims = ImageDims::new(o.image_w, o.image_h).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut m = Metric::new(o.metric, dims);
    m.enclosing = match o.enclosing.as_str() {
        "hull" => Enclosing::Hull,
        "aabb" => Enclosing::Aabb,
        other => return Err(CliError::Usage(format!("--enclosing must be hull or aabb, got '{other}'"))),
    };
    m.piou = PiouConfig::new(o.piou_k, o.piou_step).map_err(|e| CliError::Usage(e.to_string()))?;
    m.kfiou_normalized = o.kfiou_normalized;
    Ok(m)
}

enum BoxArg {
    Box(RotatedBox),
    Quad(CornerQuad),
}

fn parse_box_arg(s: &str) -> CliResult<BoxArg> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("bad box '{s}': {e}")))?;
    match vals.len() {
        5 => RotatedBox::new(vals[0], vals[1], vals[2], vals[3], vals[4])
            .map(BoxArg::Box)
            .map_err(|e| CliError::Usage(e.to_string())),
        8 => Ok(BoxArg::Quad(sort_corners([0, 1, 2, 3].map(|i| Point2::new(vals[2 * i], vals[2 * i + 1]))))),
        n => Err(CliError::Usage(format!("box needs 5 or 8 numbers, got {n} in '{s}'"))),
    }
}

fn box_of(arg: &BoxArg) -> CliResult<RotatedBox> {
    match arg {
        BoxArg::Box(b) => Ok(*b),
        BoxArg::Quad(q) => rotbox::geom::box_from_corners(q).map_err(data),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_annotations(path: &Path) -> CliResult<Vec<harness::Annotation>> {
    parse_dota(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn report_rejects(path: &Path, r: &Rectified) {
    if !r.rejected.is_empty() {
        eprintln!("{}: rejected {} non-rectangular quad(s)", path.display(), r.rejected.len());
    }
}

fn write_table<T: CsvTable>(table: &T, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => harness::emit_csv(table, p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => write_csv(table, std::io::stdout().lock()).map_err(data),
    }
}

fn run_metric(cli: &Cli, a: &MetricArgs) -> CliResult<()> {
    let metric = build_metric(&a.opts)?;
    if let (Some(g), Some(p)) = (&a.gt, &a.prd) {
        let (g, p) = (parse_box_arg(g)?, parse_box_arg(p)?);
        let v = match (&g, &p, metric.kind) {
            (BoxArg::Quad(gq), BoxArg::Quad(pq), MetricKind::Fpdiou) if a.keep_quads => fpdiou_quads(gq, pq, metric.dims),
            _ => metric.value(&box_of(&g)?, &box_of(&p)?).map_err(numeric)?,
        };
        println!("{v}");
        return Ok(());
    }
    let (Some(gf), Some(pf)) = (&a.gt_file, &a.prd_file) else {
        return Err(CliError::Usage("metric needs --gt/--prd or --gt-file/--prd-file".into()));
    };
    let (gts, prds) = (read_annotations(gf)?, read_annotations(pf)?);
    if gts.len() != prds.len() {
        return Err(CliError::Data(format!(
            "file mode pairs boxes by index but counts differ ({} vs {})",
            gts.len(),
            prds.len()
        )));
    }
    let values = if a.keep_quads && metric.kind == MetricKind::Fpdiou {
        gts.iter().zip(&prds).map(|(g, p)| fpdiou_quads(&g.quad, &p.quad, metric.dims)).collect()
    } else {
        let mut out = Vec::with_capacity(gts.len());
        let mut skipped = 0;
        for (g, p) in gts.iter().zip(&prds) {
            match (g.to_box(), p.to_box()) {
                (Ok(gb), Ok(pb)) => out.push(metric.value(&gb, &pb).map_err(numeric)?),
                _ => {
                    skipped += 1;
                    out.push(f64::NAN);
                }
            }
        }
        if skipped > 0 {
            eprintln!("rejected {skipped} pair(s) with a non-rectangular quad (value NaN)");
        }
        out
    };
    write_table(&PairValues(values), cli.out.as_deref())
}

fn run_matrix(cli: &Cli, a: &MatrixArgs) -> CliResult<()> {
    let metric = build_metric(&a.opts)?;
    let (gts, prds) = (read_annotations(&a.gt_file)?, read_annotations(&a.prd_file)?);
    if gts.is_empty() || prds.is_empty() {
        return Err(CliError::Data("matrix needs at least one box in each file".into()));
    }
    let m: MetricMatrix = if a.keep_quads && metric.kind == MetricKind::Fpdiou {
        let q = |v: &[harness::Annotation]| v.iter().map(|x| x.quad).collect::<Vec<_>>();
        harness::fpdiou_quad_matrix(&q(&gts), &q(&prds), &metric)
    } else {
        let (rg, rp) = (rectify(&gts), rectify(&prds));
        report_rejects(&a.gt_file, &rg);
        report_rejects(&a.prd_file, &rp);
        let b = |r: &Rectified| r.boxes.iter().map(|x| x.1).collect::<Vec<_>>();
        harness::metric_matrix(&b(&rg), &b(&rp), &metric).map_err(numeric)?
    };
    write_table(&m, cli.out.as_deref())
}

fn run_eval(cli: &Cli, a: &EvalArgs) -> CliResult<()> {
    let gts = read_annotations(&a.gt_file)?;
    let dets = parse_detections(open(&a.prd_file)?).map_err(|e| CliError::Data(format!("{}: {e}", a.prd_file.display())))?;
    let rg = rectify(&gts);
    report_rejects(&a.gt_file, &rg);
    let gt_boxes: Vec<GtBox> = rg
        .boxes
        .iter()
        .map(|&(i, b)| GtBox {
            image: String::new(),
            category: gts[i].category.clone(),
            bbox: b,
            difficult: gts[i].difficulty > 0,
        })
        .collect();
    let det_anns: Vec<_> = dets.iter().map(|d| d.annotation.clone()).collect();
    let rd = rectify(&det_anns);
    report_rejects(&a.prd_file, &rd);
    let prd_boxes: Vec<ScoredBox> = rd
        .boxes
        .iter()
        .map(|&(i, b)| ScoredBox {
            image: String::new(),
            category: dets[i].annotation.category.clone(),
            bbox: b,
            score: dets[i].score,
        })
        .collect();
    let thresholds = if a.thresholds.is_empty() { coco_thresholds() } else { a.thresholds.clone() };
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(CliError::Usage(format!("threshold {t} outside [0, 1]")));
    }
    let r = evaluate_ap(&gt_boxes, &prd_boxes, &thresholds);
    if r.empty_warning {
        eprintln!("warning: no ground truth or no detections; AP is 0");
    }
    let col = |t: f64| thresholds.iter().position(|&x| (x - t).abs() < 1e-9);
    let (i50, i75) = (col(0.5), col(0.75));
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    println!("{:<20} {:>6} {:>6} {:>8} {:>8} {:>8}", "category", "n_gt", "n_pred", "AP50", "AP75", "mAP");
    for c in &r.categories {
        let mean = c.curves.iter().map(|x| x.ap).sum::<f64>() / c.curves.len().max(1) as f64;
        println!(
            "{:<20} {:>6} {:>6} {:>8} {:>8} {:>8.4}",
            c.category,
            c.n_gt,
            c.n_pred,
            fmt(i50.map(|i| c.curves[i].ap)),
            fmt(i75.map(|i| c.curves[i].ap)),
            mean
        );
    }
    println!(
        "{:<20} {:>6} {:>6} {:>8} {:>8} {:>8.4}",
        "all",
        "",
        "",
        fmt(i50.map(|i| r.map_per_threshold[i])),
        fmt(i75.map(|i| r.map_per_threshold[i])),
        r.map
    );
    if let Some(p) = &a.pr_out {
        write_table(&PrCurves(&r), Some(p))?;
    }
    if let Some(p) = &cli.out {
        write_table(&r, Some(p))?;
    }
    Ok(())
}

fn run_simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<()> {
    let mut cfg = SimConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    for s in &a.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{s}'")))?;
        cfg.set(k.trim(), v.trim(), 0).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(v) = a.loss {
        cfg.loss = v;
    }
    if let Some(v) = a.n_trials {
        cfg.n_trials = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    let trace = harness::simulate_regression(&cfg).map_err(|e| match e {
        SimError::InvalidConfig(_) => CliError::Usage(e.to_string()),
        _ => numeric(e),
    })?;
    let s = trace.summary();
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "loss={} trials={} final_iou p10/p50/p90={:.4}/{:.4}/{:.4} reached_iou>={}: {} median_iters={} jittered={}",
        cfg.loss,
        s.n_trials,
        s.final_iou_p10,
        s.final_iou_p50,
        s.final_iou_p90,
        cfg.iou_target,
        s.n_reached,
        s.median_iters_to_target,
        s.n_jittered
    );
    write_table(&trace, cli.out.as_deref())
}

fn random_pair(rng: &mut rand_chacha::ChaCha8Rng) -> (RotatedBox, RotatedBox) {
    let mut b = |cx: f64, cy: f64| {
        RotatedBox::new(
            cx + rng.random_range(-3.0..3.0),
            cy + rng.random_range(-3.0..3.0),
            rng.random_range(4.0..14.0),
            rng.random_range(4.0..14.0),
            rng.random_range(-1.5..1.5),
        )
        .expect("positive extents")
    };
    (b(50.0, 50.0), b(50.0, 50.0))
}

fn run_gradcheck(cli: &Cli, a: &GradcheckArgs) -> CliResult<()> {
    let metric = build_metric(&a.opts)?;
    if let Some(n) = a.random {
        let mut rng = stream_rng(cli.seed.unwrap_or(0), 0);
        let (mut worst, mut done, mut skipped) = (0.0f64, 0usize, 0usize);
        while done < n {
            let (g, p) = random_pair(&mut rng);
            match diffcheck::check_grad(&metric, &g, &p, a.h) {
                Ok(r) => {
                    worst = worst.max(r.max_rel_err);
                    done += 1;
                }
                Err(DiffError::NonSmoothPoint(_)) => skipped += 1,
                Err(e) => return Err(numeric(e)),
            }
            if skipped > 100 * n.max(1) {
                return Err(CliError::Numeric("too many non-smooth draws".into()));
            }
        }
        println!("metric={} configs={} skipped_nonsmooth={} max_rel_err={:e}", metric.kind, done, skipped, worst);
        return Ok(());
    }
    let (Some(g), Some(p)) = (&a.gt, &a.prd) else {
        return Err(CliError::Usage("gradcheck needs --gt/--prd or --random N".into()));
    };
    let (g, p) = (box_of(&parse_box_arg(g)?)?, box_of(&parse_box_arg(p)?)?);
    let r = diffcheck::check_grad(&metric, &g, &p, a.h).map_err(numeric)?;
    println!("{:<6} {:>24} {:>24} {:>10}", "param", "analytic", "numeric", "rel_err");
    for ((name, a), n) in PARAM_NAMES.iter().zip(r.analytic).zip(r.numeric) {
        println!("{name:<6} {a:>24e} {n:>24e} {:>10.2e}", diffcheck::rel_err(a, n));
    }
    println!("max_rel_err {:e}", r.max_rel_err);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    harness::init_thread_pool();
    let result = match &cli.command {
        Command::Metric(a) => run_metric(&cli, a),
        Command::Matrix(a) => run_matrix(&cli, a),
        Command::Eval(a) => run_eval(&cli, a),
        Command::Simulate(a) => run_simulate(&cli, a),
        Command::Gradcheck(a) => run_gradcheck(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
