use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use polyweb::arrangement::count_marked;
use polyweb::crop::{build_crop_graph, crop_graph_sum, crop_subset_sum, em_signed_count};
use polyweb::estimators::{estimate_crop_expectation, phi_by, verify_duality, verify_partition, PhiMethod, PhiOptions};
use polyweb::field::sample_field;
use polyweb::io::{
    config_hash, derive_seed, parse_field, parse_web, render_field_svg, render_web_svg, replica_rng, write_field,
    write_report, write_web, Manifest, ReportRow, RunConfig, Scenario,
};
use polyweb::web::sample_web;
use polyweb::StopRule;

#[derive(Parser, Debug)]
#[command(
    name = "polyweb",
    version,
    about = "Polygonal Markov fields, polygonal webs and crops"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample fields on the configured domain.
    SampleField(Flags),
    /// Sample polygonal webs for the configured markers.
    SampleWeb(Flags),
    /// Evaluate the three crop forms on a stored web.
    Crop(Stored),
    /// Count the marked admissible configurations of the marker lines.
    CountMarked(Flags),
    /// Estimate the normalised edge correlation.
    EstimatePhi(Flags),
    /// Estimate the expected crop.
    EstimateCrop(Flags),
    /// Compare the correlation with the expected crop.
    VerifyDuality(Flags),
    /// Check the partition identity on the configured domain.
    VerifyPartition(Flags),
    /// Render a stored field or web as SVG.
    Render(Stored),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StopArg {
    Tangency,
    Immediate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Palm,
    Window,
}

#[derive(Args, Debug)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long, default_value = "polyweb-out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    stop_rule: Option<StopArg>,
    #[arg(long)]
    eps_x: Option<f64>,
    #[arg(long)]
    eps_phi: Option<f64>,
    /// Correlation estimator.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Args, Debug)]
struct Stored {
    /// A `.web.txt` or `.field.txt` file.
    input: PathBuf,
    #[arg(long, default_value = "polyweb-out")]
    out: PathBuf,
}

struct Run {
    name: &'static str,
    cfg: RunConfig,
    hash: String,
    sc: Scenario,
    out: PathBuf,
    sample_count: Option<usize>,
    replay: String,
}

impl Run {
    fn new(name: &'static str, f: Flags) -> Result<Run> {
        let (mut cfg, text) = RunConfig::load(&f.config).with_context(|| format!("reading {}", f.config.display()))?;
        if let Some(s) = f.seed {
            cfg.seed = s;
        }
        if let Some(n) = f.replicas {
            cfg.replicas = n;
        }
        if let Some(s) = f.stop_rule {
            cfg.stop_rule = match s {
                StopArg::Tangency => StopRule::AtTangency,
                StopArg::Immediate => StopRule::Immediate,
            };
        }
        if let Some(e) = f.eps_x {
            cfg.eps_x = e;
        }
        if let Some(e) = f.eps_phi {
            cfg.eps_phi = e;
        }
        if let Some(m) = f.method {
            cfg.phi_method = match m {
                MethodArg::Palm => PhiMethod::Palm,
                MethodArg::Window => PhiMethod::Window,
            };
        }
        let sc = cfg.scenario()?;
        fs::create_dir_all(&f.out).with_context(|| format!("creating {}", f.out.display()))?;
        let config = fs::canonicalize(&f.config).unwrap_or(f.config.clone());
        let mut replay = format!("{name} --config {} --seed {}", config.display(), cfg.seed);
        if let Some(n) = f.replicas {
            replay.push_str(&format!(" --replicas {n}"));
        }
        let stop = match cfg.stop_rule {
            StopRule::AtTangency => "tangency",
            StopRule::Immediate => "immediate",
        };
        let method = match cfg.phi_method {
            PhiMethod::Palm => "palm",
            PhiMethod::Window => "window",
        };
        replay.push_str(&format!(
            " --stop-rule {stop} --eps-x {} --eps-phi {} --method {method}",
            cfg.eps_x, cfg.eps_phi
        ));
        Ok(Run {
            name,
            cfg,
            hash: config_hash(&text),
            sc,
            out: f.out,
            sample_count: f.replicas,
            replay,
        })
    }

    fn row(&self, sub: &str, estimate: f64, se: f64, n: u64, eps: bool, pass: Option<bool>) -> ReportRow {
        ReportRow {
            subcommand: sub.to_string(),
            k: self.sc.markers.len(),
            lambda: self.sc.activity.lambda(),
            estimate,
            se,
            n: n as usize,
            eps_x: eps.then_some(self.cfg.eps_x),
            eps_phi: eps.then_some(self.cfg.eps_phi),
            pass,
            seed: self.cfg.seed,
            config_hash: self.hash.clone(),
        }
    }

    fn finish(&self, rows: &[ReportRow], extra: Vec<(String, String)>) -> Result<()> {
        if !rows.is_empty() {
            write_report(&self.out.join("report.csv"), rows)?;
            for r in rows {
                println!("{}", r.to_csv());
            }
        }
        let mut entries = vec![
            ("replay".to_string(), self.replay.clone()),
            ("replicas".to_string(), self.cfg.replicas.to_string()),
            ("stop_rule".to_string(), format!("{:?}", self.cfg.stop_rule)),
            ("eps_x".to_string(), self.cfg.eps_x.to_string()),
            ("eps_phi".to_string(), self.cfg.eps_phi.to_string()),
            ("phi_method".to_string(), format!("{:?}", self.cfg.phi_method)),
        ];
        entries.extend(extra);
        let m = Manifest {
            subcommand: self.name.to_string(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            entries,
        };
        fs::write(self.out.join("manifest.txt"), m.render())?;
        Ok(())
    }
}

fn opts(cfg: &RunConfig) -> PhiOptions {
    PhiOptions {
        method: cfg.phi_method,
        eps_x: cfg.eps_x,
        eps_phi: cfg.eps_phi,
    }
}

fn sample_fields(r: Run) -> Result<()> {
    let n = r.sample_count.unwrap_or(1);
    let mut files = Vec::new();
    for i in 0..n {
        let seed = derive_seed(r.cfg.seed, r.name, i as u64);
        let mut f = sample_field(
            &r.sc.activity,
            &r.sc.family,
            &mut replica_rng(r.cfg.seed, r.name, i as u64),
        )?;
        f.seed = seed;
        let name = format!("sample-{i:04}.field.txt");
        fs::write(r.out.join(&name), write_field(&f))?;
        files.push(name);
    }
    r.finish(&[], vec![("files".into(), files.join(" "))])
}

fn sample_webs(r: Run) -> Result<()> {
    let n = r.sample_count.unwrap_or(1);
    let mut files = Vec::new();
    for i in 0..n {
        let seed = derive_seed(r.cfg.seed, r.name, i as u64);
        let mut w = sample_web(
            &r.sc.activity,
            &r.sc.family,
            &r.sc.markers,
            r.cfg.stop_rule,
            &mut replica_rng(r.cfg.seed, r.name, i as u64),
        )?;
        w.seed = seed;
        let name = format!("sample-{i:04}.web.txt");
        fs::write(r.out.join(&name), write_web(&w))?;
        files.push(name);
    }
    r.finish(&[], vec![("files".into(), files.join(" "))])
}

fn stored_manifest(name: &str, s: &Stored, text: &str, extra: Vec<(String, String)>) -> Result<()> {
    fs::create_dir_all(&s.out)?;
    let mut entries = vec![("input".to_string(), s.input.display().to_string())];
    entries.extend(extra);
    let m = Manifest {
        subcommand: name.to_string(),
        config_hash: config_hash(text),
        seed: 0,
        entries,
    };
    fs::write(s.out.join("manifest.txt"), m.render())?;
    Ok(())
}

fn crop_stored(s: Stored) -> Result<()> {
    let text = fs::read_to_string(&s.input).with_context(|| format!("reading {}", s.input.display()))?;
    let web = parse_web(&text)?;
    let a = crop_subset_sum(&web)?;
    let b = crop_graph_sum(&web)?;
    let c = em_signed_count(&web);
    println!("crop_subset_sum {a}");
    println!("crop_graph_sum {b}");
    println!("signed_marker_terminal {c}");
    stored_manifest(
        "crop",
        &s,
        &text,
        vec![
            ("crop_subset_sum".into(), a.to_string()),
            ("crop_graph_sum".into(), b.to_string()),
            ("signed_marker_terminal".into(), c.to_string()),
        ],
    )?;
    if a != b || b != c {
        bail!("crop forms disagree: {a} {b} {c}");
    }
    Ok(())
}

fn render_stored(s: Stored) -> Result<()> {
    let text = fs::read_to_string(&s.input).with_context(|| format!("reading {}", s.input.display()))?;
    let svg = if text.starts_with("polyweb-web") {
        let web = parse_web(&text)?;
        let all: Vec<usize> = (0..web.branches.len()).collect();
        render_web_svg(&web, Some(&build_crop_graph(&web, &all)))
    } else {
        render_field_svg(&parse_field(&text)?)
    };
    fs::create_dir_all(&s.out)?;
    let file = s.input.file_name().and_then(|n| n.to_str()).unwrap_or("sample");
    let stem = file
        .trim_end_matches(".txt")
        .trim_end_matches(".web")
        .trim_end_matches(".field");
    let path = s.out.join(format!("{stem}.svg"));
    fs::write(&path, svg)?;
    println!("{}", path.display());
    stored_manifest("render", &s, &text, vec![("svg".into(), path.display().to_string())])
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SampleField(f) => sample_fields(Run::new("sample-field", f)?),
        Command::SampleWeb(f) => sample_webs(Run::new("sample-web", f)?),
        Command::Crop(s) => crop_stored(s),
        Command::Render(s) => render_stored(s),
        Command::CountMarked(f) => {
            let r = Run::new("count-marked", f)?;
            let n = count_marked(&r.sc.markers, &r.sc.domain)?;
            let row = r.row("count-marked", n as f64, 0.0, 1, false, None);
            r.finish(&[row], vec![])
        }
        Command::EstimatePhi(f) => {
            let r = Run::new("estimate-phi", f)?;
            let (e, tail) = phi_by(
                &r.sc.markers,
                &r.sc.activity,
                &r.sc.family,
                &opts(&r.cfg),
                r.cfg.replicas,
                &mut replica_rng(r.cfg.seed, r.name, 0),
            )?;
            let eps = r.cfg.phi_method == PhiMethod::Window;
            let row = r.row("estimate-phi", e.estimate, e.se, e.n, eps, None);
            r.finish(&[row], vec![("palm_tail_mass".into(), tail.to_string())])
        }
        Command::EstimateCrop(f) => {
            let r = Run::new("estimate-crop", f)?;
            let e = estimate_crop_expectation(
                &r.sc.markers,
                &r.sc.activity,
                &r.sc.family,
                r.cfg.stop_rule,
                r.cfg.replicas,
                &mut replica_rng(r.cfg.seed, r.name, 0),
            )?;
            let row = r.row("estimate-crop", e.estimate, e.se, e.n, false, None);
            r.finish(&[row], vec![])
        }
        Command::VerifyDuality(f) => {
            let r = Run::new("verify-duality", f)?;
            let n_field = r.cfg.field_replicas.unwrap_or(r.cfg.replicas);
            let d = verify_duality(
                &r.sc.markers,
                &r.sc.activity,
                &r.sc.family,
                r.cfg.stop_rule,
                &opts(&r.cfg),
                n_field,
                r.cfg.replicas,
                &mut replica_rng(r.cfg.seed, r.name, 0),
            )?;
            let eps = r.cfg.phi_method == PhiMethod::Window;
            let mut rows = vec![
                r.row("verify-duality/phi", d.phi.estimate, d.phi.se, d.phi.n, eps, None),
                r.row("verify-duality/crop", d.crop.estimate, d.crop.se, d.crop.n, false, None),
            ];
            if let Some(h) = &d.phi_half {
                let mut row = r.row("verify-duality/phi-half-eps", h.estimate, h.se, h.n, true, None);
                row.eps_x = h.eps_x;
                row.eps_phi = h.eps_phi;
                rows.push(row);
            }
            rows.push(r.row(
                "verify-duality",
                d.difference,
                d.combined_se,
                d.phi.n + d.crop.n,
                eps,
                Some(d.pass),
            ));
            let mut extra = vec![("palm_tail_mass".to_string(), d.tail_mass.to_string())];
            if let Some((s, se)) = d.eps_slope {
                extra.push(("eps_slope".into(), format!("{s} +- {se}")));
            }
            r.finish(&rows, extra)
        }
        Command::VerifyPartition(f) => {
            let r = Run::new("verify-partition", f)?;
            let p = verify_partition(
                &r.sc.activity,
                &r.sc.domain,
                r.cfg.replicas,
                &mut replica_rng(r.cfg.seed, r.name, 0),
            )?;
            let row = r.row(
                "verify-partition",
                p.estimate.estimate,
                p.estimate.se,
                p.estimate.n,
                false,
                Some(p.pass),
            );
            r.finish(
                &[row],
                vec![
                    ("target".into(), p.target.to_string()),
                    ("overflow".into(), p.overflow.to_string()),
                    ("overflow_fraction".into(), p.overflow_fraction.to_string()),
                    ("reliable".into(), p.reliable.to_string()),
                ],
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
