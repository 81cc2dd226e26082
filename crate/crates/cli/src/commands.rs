use std::path::{Path, PathBuf};

use clap::Args;
use gantrycam::analytics::{self, clopper_pearson, ClassCounts, RunAccounting};
use gantrycam::config::ToolkitConfig;
use gantrycam::dataset::CoordinateConvention;
use gantrycam::geometry::CameraPose;
use gantrycam::io::read_json;
use gantrycam::pipeline::{self, plan_poses, run_to_directory, ValidationReport};
use gantrycam::raster::Image;
use gantrycam::route::{
    brute_force_tsp, nearest_neighbor_route, plan_zigzag, random_waypoints, route_cost, Route, WaypointSet,
    BRUTE_FORCE_MAX,
};
use gantrycam::scene::{RunLog, Scene};
use gantrycam::segmentation::{
    b_channel, background_subtract, morphology, threshold_keyout, MaskStats, MorphOp, DEFAULT_B_THRESHOLD,
};
use gantrycam::Execution;
use serde::Serialize;

use crate::report::{emit, table};
use crate::Common;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gantrycam::Error),
    #[error("{0}")]
    Usage(String),
    #[error("io error at {0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
}

/// How a command that completed should exit.
pub enum Status {
    Clean,
    /// The command ran but found problems (for example invalid metadata).
    Findings,
}

type CmdResult = Result<Status, CliError>;

impl Common {
    fn config(&self) -> Result<ToolkitConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => read_json::<ToolkitConfig>(path)?,
            None => ToolkitConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(scale) = self.scale {
            cfg.render_scale = scale;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if self.legacy_origin {
            cfg.coordinate_convention = CoordinateConvention::UpperRight;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// Report file inside `--out`, written only when `--out` is given.
    fn report_file(&self, name: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|d| d.join(name))
    }
}

/// Where the scene comes from when a command needs one.
#[derive(Debug, Clone, Args)]
pub struct SceneSource {
    /// Scene JSON file (overrides the config's scene path).
    #[arg(long, value_name = "FILE")]
    pub scene: Option<PathBuf>,
    /// Use the built-in nine-plant demo scene.
    #[arg(long, conflicts_with = "scene")]
    pub demo: bool,
    /// Generate this many plants at seeded random positions.
    #[arg(long, value_name = "N", conflicts_with_all = ["scene", "demo"])]
    pub random_plants: Option<usize>,
}

impl SceneSource {
    fn load(&self, cfg: &ToolkitConfig) -> Result<Option<Scene>, CliError> {
        let volume = cfg.gantry.volume();
        let scene = if self.demo {
            Scene::demo(&volume)
        } else if let Some(n) = self.random_plants {
            Scene::random(n, &volume, cfg.seed)
        } else if let Some(path) = self.scene.as_ref().or(cfg.scene.as_ref()) {
            read_json::<Scene>(path)?
        } else {
            return Ok(None);
        };
        scene.validate(&volume)?;
        Ok(Some(scene))
    }
}

// ---------------------------------------------------------------- plan

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// JSON array of [x, y, z] waypoints in mm.
    #[arg(long, value_name = "FILE")]
    pub waypoints: Option<PathBuf>,
    /// Plan over this many seeded random waypoints.
    #[arg(long, value_name = "N", conflicts_with = "waypoints")]
    pub random: Option<usize>,
    #[command(flatten)]
    pub scene: SceneSource,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize)]
pub struct PlannerResult {
    pub route: Route,
    pub distance_mm: f64,
    pub seconds: f64,
    pub leg_seconds: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PlanReport {
    pub waypoints: Vec<[f64; 3]>,
    pub zigzag: PlannerResult,
    pub nearest_neighbor: PlannerResult,
    /// Exhaustive optimum, present for at most ten waypoints.
    pub brute_force: Option<PlannerResult>,
    /// Plants without a reachable pose (scene input only).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unreachable_plants: Vec<String>,
}

pub fn plan(args: PlanArgs) -> CmdResult {
    let cfg = args.common.config()?;
    let volume = cfg.gantry.volume();
    let mut poses: Option<Vec<CameraPose>> = None;
    let mut unreachable = Vec::new();
    let positions = if let Some(path) = &args.waypoints {
        read_json::<Vec<[f64; 3]>>(path)?
    } else if let Some(n) = args.random {
        random_waypoints(n, &volume, cfg.seed)
    } else if let Some(scene) = args.scene.load(&cfg)? {
        let plan = plan_poses(&scene, &cfg)?;
        unreachable = plan.unreachable;
        let p = plan.poses.iter().map(CameraPose::position_array).collect();
        poses = Some(plan.poses);
        p
    } else {
        return Err(CliError::Usage(
            "plan needs --waypoints, --random, --scene, --demo or --random-plants".into(),
        ));
    };

    let set = WaypointSet::new(positions, volume)?;
    let motion = cfg.motion();
    let evaluate = |route: Route| -> Result<PlannerResult, CliError> {
        let cost = route_cost(&route, &set, &motion)?;
        Ok(PlannerResult {
            route,
            distance_mm: cost.total_mm,
            seconds: cost.total_seconds,
            leg_seconds: cost.leg_seconds,
        })
    };
    let zigzag = evaluate(plan_zigzag(&set, &cfg.zigzag)?)?;
    let report = PlanReport {
        waypoints: set.positions().to_vec(),
        nearest_neighbor: evaluate(nearest_neighbor_route(&set)?)?,
        brute_force: if set.len() <= BRUTE_FORCE_MAX {
            Some(evaluate(brute_force_tsp(&set, args.common.exec())?)?)
        } else {
            None
        },
        zigzag,
        unreachable_plants: unreachable,
    };

    if let (Some(poses), Some(dir)) = (&poses, &args.common.out) {
        let ordered: Vec<CameraPose> = report.zigzag.route.0.iter().map(|&i| poses[i]).collect();
        create_dir(dir)?;
        gantrycam::io::write_json(&dir.join("poses.json"), &ordered)?;
    }
    emit(&report, args.common.report_file("plan.json").as_deref(), args.common.json, || {
        plan_text(&report)
    })?;
    Ok(Status::Clean)
}

fn plan_text(r: &PlanReport) -> String {
    let mut rows = vec![row("zig-zag", &r.zigzag), row("nearest neighbour", &r.nearest_neighbor)];
    if let Some(b) = &r.brute_force {
        rows.push(row("brute force", b));
    }
    let mut s = format!("{} waypoints\n", r.waypoints.len());
    s += &table(&["planner", "distance (mm)", "time (s)", "vs optimum"], &with_ratio(rows, r));
    s += &format!("zig-zag route: {:?}\n", r.zigzag.route.0);
    if !r.unreachable_plants.is_empty() {
        s += &format!("no reachable pose for: {}\n", r.unreachable_plants.join(", "));
    }
    s
}

fn row(name: &str, p: &PlannerResult) -> Vec<String> {
    vec![name.into(), format!("{:.1}", p.distance_mm), format!("{:.3}", p.seconds)]
}

fn with_ratio(rows: Vec<Vec<String>>, r: &PlanReport) -> Vec<Vec<String>> {
    let best = r.brute_force.as_ref().map(|b| b.distance_mm);
    let dists = [Some(r.zigzag.distance_mm), Some(r.nearest_neighbor.distance_mm), best];
    rows.into_iter()
        .zip(dists)
        .map(|(mut row, d)| {
            row.push(match (best, d) {
                (Some(b), Some(d)) if b > 0.0 => format!("{:.3}", d / b),
                (Some(_), Some(_)) => "1.000".into(),
                _ => "-".into(),
            });
            row
        })
        .collect()
}

// ------------------------------------------------------------ simulate

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scene: SceneSource,
    /// JSON array of camera poses in visiting order; planned around every
    /// plant when omitted.
    #[arg(long, value_name = "FILE")]
    pub poses: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

pub fn simulate(args: SimulateArgs) -> CmdResult {
    let cfg = args.common.config()?;
    let scene = args
        .scene
        .load(&cfg)?
        .ok_or_else(|| CliError::Usage("simulate needs --scene, --demo or --random-plants".into()))?;
    let poses = match &args.poses {
        Some(path) => read_json::<Vec<CameraPose>>(path)?,
        None => plan_poses(&scene, &cfg)?.poses,
    };
    let out = cfg.output_dir.clone();
    let summary = run_to_directory(&scene, &poses, &cfg, &out, args.common.exec())?;
    emit(&summary, Some(&out.join("summary.json")), args.common.json, || simulate_text(&summary))?;
    Ok(Status::Clean)
}

fn simulate_text(s: &pipeline::RunSummary) -> String {
    let mut out = format!("run written to {}\n", s.output_dir.display());
    out += &format!("master images      {}\n", s.masters);
    out += &format!("subimages          {}\n", s.subimages);
    for (class, n) in &s.subimages_per_class {
        out += &format!("  {:<16} {n}\n", class.as_str());
    }
    out += &format!("imaging time       {:.1} s\n", s.accounting.t_p);
    out += &format!("s per master       {:.3}\n", s.master_rate);
    if let Some(r) = s.subimage_rate {
        out += &format!("s per subimage     {r:.3}\n");
    }
    if s.unlabeled_sightings > 0 {
        out += &format!("unlabeled sightings {} (sphere crosses the camera plane)\n", s.unlabeled_sightings);
    }
    if s.subpixel_sightings > 0 {
        out += &format!("sub-pixel sightings {}\n", s.subpixel_sightings);
    }
    out
}

// ------------------------------------------------------------- segment

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Image to segment (PNG).
    #[arg(long, value_name = "FILE")]
    pub image: PathBuf,
    /// Empty-scene image; when given, foreground is every pixel that
    /// differs from it instead of b-channel keying.
    #[arg(long, value_name = "FILE")]
    pub background: Option<PathBuf>,
    /// Per-channel tolerance for background subtraction.
    #[arg(long, default_value_t = 0)]
    pub tolerance: u8,
    /// b-channel threshold; pixels strictly above it are foreground.
    #[arg(long, default_value_t = DEFAULT_B_THRESHOLD, allow_negative_numbers = true)]
    pub threshold: f64,
    /// Morphology steps applied in order, e.g. `dilate:2`, `erode:1`,
    /// `fill-holes`.
    #[arg(long = "morph", value_name = "OP[:RADIUS]")]
    pub morph: Vec<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize)]
pub struct SegmentReport {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub method: String,
    #[serde(flatten)]
    pub stats: MaskStats,
}

fn parse_morph(spec: &str) -> Result<(MorphOp, u32), CliError> {
    let (op, radius) = spec.split_once(':').unwrap_or((spec, "1"));
    let radius = radius
        .parse()
        .map_err(|_| CliError::Usage(format!("bad morphology radius in '{spec}'")))?;
    Ok((op.parse()?, radius))
}

pub fn segment(args: SegmentArgs) -> CmdResult {
    let cfg = args.common.config()?;
    let steps = args.morph.iter().map(|s| parse_morph(s)).collect::<Result<Vec<_>, _>>()?;
    let image = Image::load(&args.image)?;
    let (mut mask, method) = match &args.background {
        Some(bg) => (
            background_subtract(&image, &Image::load(bg)?, args.tolerance)?,
            format!("background subtraction, tolerance {}", args.tolerance),
        ),
        None => (
            threshold_keyout(&b_channel(&image, args.common.exec()), args.threshold),
            format!("b-channel keying, b > {}", args.threshold),
        ),
    };
    for (op, radius) in steps {
        mask = morphology(&mask, op, radius)?;
    }
    create_dir(&cfg.output_dir)?;
    let mask_path = cfg.output_dir.join("mask.png");
    mask.save_png(&mask_path)?;
    let report = SegmentReport {
        image: args.image.clone(),
        mask: mask_path,
        method,
        stats: MaskStats::from(&mask),
    };
    emit(&report, Some(&cfg.output_dir.join("segment.json")), args.common.json, || {
        format!(
            "{}x{} image, {}\nforeground pixels  {}\nforeground fraction {:.6}\nmask written to {}\n",
            report.stats.width,
            report.stats.height,
            report.method,
            report.stats.foreground_pixels,
            report.stats.foreground_fraction,
            report.mask.display()
        )
    })?;
    Ok(Status::Clean)
}

// ------------------------------------------------------------ validate

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Directory of metadata JSON files (for a run directory, its
    /// `metadata/` subdirectory is used).
    pub dir: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn validate(args: ValidateArgs) -> CmdResult {
    args.common.config()?;
    let nested = args.dir.join("metadata");
    let dir = if nested.is_dir() { nested } else { args.dir.clone() };
    let report: ValidationReport = pipeline::validate_directory(&dir)?;
    emit(&report, args.common.report_file("validation.json").as_deref(), args.common.json, || {
        let mut s = format!("{} files checked, {} errors\n", report.files_checked, report.errors.len());
        for e in &report.errors {
            s += &format!("{}: {}: {}\n", e.file.display(), e.path, e.message);
        }
        s
    })?;
    Ok(if report.is_ok() { Status::Clean } else { Status::Findings })
}

// --------------------------------------------------------------- stats

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Run log written by `simulate`; supplies every timing and count.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["t_p", "t_d", "t_c", "n_m", "n_s"])]
    pub run_log: Option<PathBuf>,
    /// Imaging time including robot motion, s.
    #[arg(long)]
    pub t_p: Option<f64>,
    /// Bulk download time, s.
    #[arg(long, default_value_t = 0.0)]
    pub t_d: f64,
    /// Cropping time, s.
    #[arg(long, default_value_t = 0.0)]
    pub t_c: f64,
    /// Number of master images.
    #[arg(long)]
    pub n_m: Option<u64>,
    /// Number of subimages.
    #[arg(long, default_value_t = 0)]
    pub n_s: u64,
    /// Class count as NAME=COUNT (repeatable) for class weights.
    #[arg(long = "class", value_name = "NAME=COUNT")]
    pub classes: Vec<String>,
    /// Successes/trials as K/N (repeatable) for Clopper-Pearson intervals.
    #[arg(long = "interval", value_name = "K/N")]
    pub intervals: Vec<String>,
    /// Significance level of the intervals.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize)]
pub struct IntervalReport {
    pub successes: u64,
    pub trials: u64,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub accounting: Option<RunAccounting>,
    /// Seconds per master image.
    pub t_m: Option<f64>,
    /// Seconds per subimage.
    pub t_s: Option<f64>,
    pub class_weights: Vec<(String, f64)>,
    pub intervals: Vec<IntervalReport>,
}

fn parse_pair<'a>(spec: &'a str, sep: char, what: &str) -> Result<(&'a str, u64), CliError> {
    let (a, b) = spec
        .split_once(sep)
        .ok_or_else(|| CliError::Usage(format!("expected {what}, got '{spec}'")))?;
    let b = b.trim().parse().map_err(|_| CliError::Usage(format!("bad count in '{spec}'")))?;
    Ok((a.trim(), b))
}

pub fn stats(args: StatsArgs) -> CmdResult {
    args.common.config()?;
    let accounting = match (&args.run_log, args.t_p, args.n_m) {
        (Some(path), _, _) => Some(read_json::<RunLog>(path)?.accounting()),
        (None, Some(t_p), Some(n_m)) => Some(RunAccounting {
            t_p,
            t_d: args.t_d,
            t_c: args.t_c,
            n_m,
            n_s: args.n_s,
        }),
        (None, None, None) => None,
        _ => return Err(CliError::Usage("--t-p and --n-m must be given together".into())),
    };
    let t_m = accounting.as_ref().map(analytics::master_rate).transpose()?;
    let t_s = match &accounting {
        Some(a) if a.n_s > 0 => Some(analytics::subimage_rate(a)?),
        _ => None,
    };
    let class_weights = if args.classes.is_empty() {
        Vec::new()
    } else {
        let counts = args
            .classes
            .iter()
            .map(|c| parse_pair(c, '=', "NAME=COUNT").map(|(n, k)| (n.to_string(), k)))
            .collect::<Result<Vec<_>, _>>()?;
        analytics::class_weights(&ClassCounts(counts))?
    };
    let intervals = args
        .intervals
        .iter()
        .map(|spec| {
            let (k, n) = parse_pair(spec, '/', "K/N")?;
            let k = k.parse().map_err(|_| CliError::Usage(format!("bad successes in '{spec}'")))?;
            let ci = clopper_pearson(k, n, args.alpha)?;
            Ok(IntervalReport {
                successes: k,
                trials: n,
                alpha: args.alpha,
                lower: ci.lower,
                upper: ci.upper,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if accounting.is_none() && class_weights.is_empty() && intervals.is_empty() {
        return Err(CliError::Usage(
            "stats needs --run-log, --t-p/--n-m, --class or --interval".into(),
        ));
    }
    let report = StatsReport {
        accounting,
        t_m,
        t_s,
        class_weights,
        intervals,
    };
    emit(&report, args.common.report_file("stats.json").as_deref(), args.common.json, || {
        stats_text(&report)
    })?;
    Ok(Status::Clean)
}

fn stats_text(r: &StatsReport) -> String {
    let mut s = String::new();
    if let Some(a) = &r.accounting {
        s += &format!(
            "t_p {:.1} s, t_d {:.1} s, t_c {:.1} s, {} masters, {} subimages\n",
            a.t_p, a.t_d, a.t_c, a.n_m, a.n_s
        );
    }
    if let Some(t) = r.t_m {
        s += &format!("s per master image  {t:.3}\n");
    }
    if let Some(t) = r.t_s {
        s += &format!("s per subimage      {t:.3}\n");
    }
    for (name, w) in &r.class_weights {
        s += &format!("class weight {name:<10} {w:.4}\n");
    }
    for i in &r.intervals {
        s += &format!(
            "{}/{} = {:.4}, {:.0}% interval [{:.5}, {:.5}]\n",
            i.successes,
            i.trials,
            i.successes as f64 / i.trials as f64,
            100.0 * (1.0 - i.alpha),
            i.lower,
            i.upper
        );
    }
    s
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))
}
